#include "pointgnn/pipeline.hpp"

#include <algorithm>
#include <filesystem>

#include "pointgnn/errors.hpp"
#include "pointgnn/io.hpp"

namespace pgnn {

SceneBoxes detect_scenes(const PointGnnModel& model, const std::vector<Scene>& scenes,
                         const InferenceOptions& options) {
  SceneBoxes out;
  out.reserve(scenes.size());
  for (const auto& scene : scenes) {
    std::vector<LabeledBox> boxes;
    for (auto& det : forward_full(model, scene.cloud, options)) boxes.push_back(std::move(det.box));
    out.push_back(std::move(boxes));
  }
  return out;
}

std::vector<std::string> object_classes(const ClassSpec& spec) {
  std::vector<std::string> names;
  for (int c : spec.localized()) {
    const std::string& name = spec.classes[static_cast<std::size_t>(c)].object;
    if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
  }
  return names;
}

IouFn iou_function(IouKind kind) {
  if (kind == IouKind::kBev) return [](const Box3D& a, const Box3D& b) { return bev_iou(a, b); };
  return [](const Box3D& a, const Box3D& b) { return iou_3d(a, b); };
}

std::vector<EvalRow> evaluate_scenes(const SceneBoxes& detections, const std::vector<Scene>& scenes,
                                     const ClassSpec& spec, const std::vector<double>& thresholds,
                                     IouKind kind) {
  if (detections.size() != scenes.size()) {
    throw ArgumentError("evaluate_scenes: detection and scene counts differ");
  }
  SceneBoxes gts;
  for (const auto& s : scenes) gts.push_back(s.boxes);
  const IouFn iou = iou_function(kind);
  std::vector<EvalRow> rows;
  for (const auto& name : object_classes(spec)) {
    for (double t : thresholds) rows.push_back(evaluate_class(detections, gts, name, iou, t));
  }
  return rows;
}

std::vector<Scene> thin_scan_lines(const std::vector<Scene>& scenes, int source_lines, int lines,
                                   std::uint64_t seed) {
  std::vector<Scene> out;
  out.reserve(scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    Scene s;
    s.cloud = scanline_downsample(scenes[i].cloud, source_lines, lines, 50, seed + i);
    s.boxes = scenes[i].boxes;
    out.push_back(std::move(s));
  }
  return out;
}

void save_model(const std::string& dir, const Preset& preset, const PointGnnParams& params) {
  std::filesystem::create_directories(dir);
  const auto tensors = params_to_tensors(params);
  write_file_atomic(dir + "/model.ckpt", encode_checkpoint(tensors));
  write_file_atomic(dir + "/manifest.txt", manifest_text(preset));
}

LoadedModel load_model(const std::string& dir) {
  const KeyValues kv = read_key_values(dir + "/manifest.txt");
  Preset preset = preset_from_config(kv);
  PointGnnParams params = make_zero_params(preset.model, preset.spec);
  params_from_tensors(params, decode_checkpoint(read_file_bytes(dir + "/model.ckpt")));
  PointGnnModel model{preset.model, preset.spec, std::move(params)};
  return {std::move(preset), std::move(model)};
}

}  // namespace pgnn

#pragma once

#include <string>
#include <vector>

#include "pointgnn/config.hpp"
#include "pointgnn/eval.hpp"

namespace pgnn {

using SceneBoxes = std::vector<std::vector<LabeledBox>>;

// Runs forward_full on every scene.
SceneBoxes detect_scenes(const PointGnnModel& model, const std::vector<Scene>& scenes,
                         const InferenceOptions& options);

// Distinct object names of the localized classes, in class order.
std::vector<std::string> object_classes(const ClassSpec& spec);

enum class IouKind { k3d, kBev };
IouFn iou_function(IouKind kind);

// One row per object class and threshold.
std::vector<EvalRow> evaluate_scenes(const SceneBoxes& detections, const std::vector<Scene>& scenes,
                                     const ClassSpec& spec, const std::vector<double>& thresholds,
                                     IouKind kind = IouKind::k3d);

// Scan-line thinning of every scene cloud; boxes are unchanged.
std::vector<Scene> thin_scan_lines(const std::vector<Scene>& scenes, int source_lines, int lines,
                                   std::uint64_t seed);

// A model directory holds `manifest.txt` (config keys) and `model.ckpt`.
void save_model(const std::string& dir, const Preset& preset, const PointGnnParams& params);
struct LoadedModel {
  Preset preset;
  PointGnnModel model;
};
LoadedModel load_model(const std::string& dir);

}  // namespace pgnn

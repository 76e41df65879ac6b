// pointgnn: command-line front end for the detector toolkit.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <CLI11.hpp>

#include "pointgnn/config.hpp"
#include "pointgnn/diagnostics.hpp"
#include "pointgnn/errors.hpp"
#include "pointgnn/io.hpp"
#include "pointgnn/pipeline.hpp"

namespace fs = std::filesystem;
using namespace pgnn;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct Common {
  std::string preset = "toy";
  std::string config;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--preset", c.preset, "Preset: car, pedcyc or toy")
      ->check(CLI::IsMember({"car", "pedcyc", "toy"}));
  cmd->add_option("--config", c.config, "key=value config file applied over the preset");
  cmd->add_option("--seed", c.seed, "Random seed");
}

Preset resolve_preset(const Common& c) {
  Preset p = make_preset(c.preset);
  if (!c.config.empty()) {
    KeyValues kv = read_key_values(c.config);
    if (auto it = kv.find("preset"); it != kv.end()) {
      p = make_preset(it->second);
    }
    apply_config(p, kv);
  }
  if (c.seed) {
    p.train.seed = *c.seed;
    p.inference.seed = *c.seed;
  }
  return p;
}

PointCloud read_cloud(const std::string& path) {
  if (fs::path(path).extension() == ".bin") return read_kitti_bin(path);
  return read_point_text(path);
}

std::string boxes_text(const std::vector<LabeledBox>& boxes) {
  std::ostringstream out;
  write_boxes_text(out, boxes);
  return out.str();
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_file_atomic(path, text);
  }
}

std::string eval_csv(const std::vector<EvalRow>& rows) {
  std::ostringstream out;
  write_eval_report(out, rows);
  return out.str();
}

std::vector<Scene> load_scenes(const std::string& dir) {
  auto scenes = read_scene_dir(dir);
  if (scenes.empty()) throw FormatError("no scene_*.txt files in " + dir);
  return scenes;
}

IouKind parse_iou_kind(const std::string& s) { return s == "bev" ? IouKind::kBev : IouKind::k3d; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- synth ---------------------------------------------------------------

int run_synth(const Common& c, int count, const std::string& output) {
  const Preset p = resolve_preset(c);
  std::mt19937_64 rng(c.seed.value_or(0));
  for (int i = 0; i < count; ++i) {
    write_scene(output, static_cast<std::size_t>(i), generate_synthetic_scene(rng, p.synth));
  }
  std::cout << "wrote " << count << " scenes to " << output << '\n';
  return 0;
}

// ---- graph ---------------------------------------------------------------

int run_graph(const Common& c, const std::string& input, std::optional<double> radius,
              std::optional<double> voxel, bool oracle, const std::string& dump) {
  const Preset p = resolve_preset(c);
  PointCloud cloud = read_cloud(input);
  if (voxel) {
    cloud = voxel_downsample(cloud, *voxel, VoxelMode::kRandom, c.seed.value_or(0)).cloud;
  }
  const double r = radius.value_or(p.train.radius);
  const auto t0 = std::chrono::steady_clock::now();
  const Graph g = build_graph(cloud, r);
  const double elapsed = seconds_since(t0);
  const auto deg = in_degrees(g);
  std::size_t max_deg = 0;
  for (auto d : deg) max_deg = std::max(max_deg, d);
  std::cout << "vertices " << g.vertices.size() << "\nedges " << g.edges.size() << "\nradius " << r
            << "\nmean_in_degree "
            << (g.vertices.empty() ? 0.0 : double(g.edges.size()) / double(g.vertices.size()))
            << "\nmax_in_degree " << max_deg << "\nbuild_seconds " << elapsed << '\n';
  if (!dump.empty()) {
    std::ostringstream out;
    write_graph_dump(out, g);
    write_file_atomic(dump, out.str());
  }
  if (oracle) {
    const bool same = brute_force_edges(cloud, r) == g.edges;
    std::cout << "oracle " << (same ? "MATCH" : "MISMATCH") << '\n';
    if (!same) return kExitData;
  }
  return 0;
}

// ---- train ---------------------------------------------------------------

int run_train(const Common& c, const std::string& input, const std::string& output,
              std::optional<long> steps, long checkpoint_interval, bool quiet) {
  Preset p = resolve_preset(c);
  if (steps) p.train.total_steps = *steps;
  const auto scenes = load_scenes(input);
  PointGnnModel model{p.model, p.spec, make_initial_params(p.model, p.spec, p.train.seed)};
  fs::create_directories(output);
  auto on_checkpoint = [&](long step, const PointGnnParams& params) {
    save_model((fs::path(output) / ("step_" + std::to_string(step))).string(), p, params);
  };
  auto on_progress = [&](const LossRecord& r) {
    if (!quiet && p.train.log_interval > 0 && (r.step + 1) % p.train.log_interval == 0) {
      std::cerr << "step " << r.step << " total " << r.total << " cls " << r.cls << " loc "
                << r.loc << " lr " << r.lr << '\n';
    }
  };
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult result = train(model, p.train, scenes, on_checkpoint, checkpoint_interval, on_progress);
  save_model(output, p, result.params);
  std::ostringstream curve;
  write_loss_curve(curve, result.curve);
  write_file_atomic((fs::path(output) / "loss.csv").string(), curve.str());
  std::cout << "trained " << result.curve.size() << " steps in " << seconds_since(t0) << " s\n";
  if (!result.curve.empty()) {
    std::cout << "loss first " << result.curve.front().total << " last " << result.curve.back().total
              << '\n';
  }
  return 0;
}

// ---- infer / eval / ablate / sparsity ------------------------------------

InferenceOptions inference_options(const LoadedModel& lm, const Common& c) {
  InferenceOptions opt = lm.preset.inference;
  if (c.seed) opt.seed = *c.seed;
  return opt;
}

LoadedModel load_with_overrides(const std::string& dir, const Common& c) {
  LoadedModel lm = load_model(dir);
  if (!c.config.empty()) {
    apply_config(lm.preset, read_key_values(c.config));
    if (lm.preset.model.state_width != lm.model.config.state_width) {
      throw ArgumentError("config may not change the architecture of a trained model");
    }
  }
  return lm;
}

int run_infer(const Common& c, const std::string& model_dir, const std::string& input,
              const std::string& output) {
  const LoadedModel lm = load_with_overrides(model_dir, c);
  const InferenceOptions opt = inference_options(lm, c);
  if (fs::is_directory(input)) {
    const auto stems = scene_names(input);
    fs::create_directories(output);
    for (const auto& stem : stems) {
      const auto dets = forward_full(lm.model, read_point_text(stem + ".txt"), opt);
      std::vector<LabeledBox> boxes;
      for (const auto& d : dets) boxes.push_back(d.box);
      write_file_atomic((fs::path(output) / (fs::path(stem).filename().string() + ".boxes")).string(),
                        boxes_text(boxes));
    }
    std::cout << "processed " << stems.size() << " scenes\n";
    return 0;
  }
  const auto dets = forward_full(lm.model, read_cloud(input), opt);
  std::vector<LabeledBox> boxes;
  for (const auto& d : dets) boxes.push_back(d.box);
  emit(output, boxes_text(boxes));
  return 0;
}

int run_eval(const Common& c, const std::string& model_dir, const std::string& detections,
             const std::string& input, const std::string& output,
             const std::vector<double>& thresholds, const std::string& iou) {
  const auto scenes = load_scenes(input);
  SceneBoxes dets;
  ClassSpec spec;
  if (!detections.empty()) {
    spec = resolve_preset(c).spec;
    for (const auto& stem : scene_names(input)) {
      const auto path = fs::path(detections) / (fs::path(stem).filename().string() + ".boxes");
      dets.push_back(read_boxes_text(path.string()));
    }
  } else {
    if (model_dir.empty()) throw ArgumentError("eval needs --model or --detections");
    const LoadedModel lm = load_with_overrides(model_dir, c);
    spec = lm.model.spec;
    dets = detect_scenes(lm.model, scenes, inference_options(lm, c));
  }
  emit(output, eval_csv(evaluate_scenes(dets, scenes, spec, thresholds, parse_iou_kind(iou))));
  return 0;
}

bool parse_switch(const std::string& key, const std::string& v) {
  if (v == "on" || v == "1" || v == "true") return true;
  if (v == "off" || v == "0" || v == "false") return false;
  throw ArgumentError("toggle " + key + " expects on/off, got '" + v + "'");
}

int run_ablate(const Common& c, const std::string& model_dir, const std::string& input,
               const std::string& output, const std::vector<std::string>& toggles,
               const std::string& retrain_dir, const std::vector<double>& thresholds) {
  LoadedModel lm = load_with_overrides(model_dir, c);
  InferenceOptions opt = inference_options(lm, c);
  bool merge = opt.nms.mode == NmsMode::kMergeScore || opt.nms.mode == NmsMode::kMergeOnly;
  bool score = opt.nms.mode == NmsMode::kMergeScore || opt.nms.mode == NmsMode::kScoreOnly;
  std::optional<int> iterations;
  std::optional<bool> auto_reg;
  for (const auto& t : toggles) {
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ArgumentError("toggle must be key=value: " + t);
    const std::string key = t.substr(0, eq), value = t.substr(eq + 1);
    if (key == "auto_reg") auto_reg = parse_switch(key, value);
    else if (key == "merge") merge = parse_switch(key, value);
    else if (key == "score") score = parse_switch(key, value);
    else if (key == "T") {
      std::size_t used = 0;
      int n = -1;
      try { n = std::stoi(value, &used); } catch (const std::exception&) {}
      if (used != value.size() || n < 0) throw ArgumentError("toggle T expects a count, got " + value);
      iterations = n;
    } else {
      throw ArgumentError("unknown toggle '" + key + "' (auto_reg, merge, score, T)");
    }
  }
  opt.nms.mode = parse_nms_mode(merge, score);

  if (!retrain_dir.empty()) {
    // Train a fresh model with the architectural toggles applied.
    Preset p = lm.preset;
    if (c.seed) p.train.seed = *c.seed;
    if (iterations) p.model.iterations = *iterations;
    if (auto_reg) p.model.auto_registration = *auto_reg;
    PointGnnModel fresh{p.model, p.spec, make_initial_params(p.model, p.spec, p.train.seed)};
    fresh.params = train(fresh, p.train, load_scenes(retrain_dir)).params;
    lm.model = std::move(fresh);
  } else {
    if (iterations && *iterations > static_cast<int>(lm.model.params.iterations.size())) {
      throw ArgumentError("toggle T exceeds the trained iteration count");
    }
    opt.iterations = iterations;
    opt.auto_registration = auto_reg;
  }
  const auto scenes = load_scenes(input);
  const auto dets = detect_scenes(lm.model, scenes, opt);
  emit(output, eval_csv(evaluate_scenes(dets, scenes, lm.model.spec, thresholds)));
  return 0;
}

int run_sparsity(const Common& c, const std::string& model_dir, const std::string& input,
                 const std::string& output, const std::vector<int>& lines, int source_lines,
                 const std::vector<double>& thresholds) {
  const LoadedModel lm = load_with_overrides(model_dir, c);
  const InferenceOptions opt = inference_options(lm, c);
  const auto scenes = load_scenes(input);
  std::ostringstream out;
  out << "lines,class,iou_threshold,ap,num_gt,num_det\n";
  for (int n : lines) {
    if (n <= 0 || n > source_lines || source_lines % n != 0) {
      throw ArgumentError("--lines values must divide the source line count " +
                          std::to_string(source_lines));
    }
    const auto thin = thin_scan_lines(scenes, source_lines, n, c.seed.value_or(0));
    const auto rows =
        evaluate_scenes(detect_scenes(lm.model, thin, opt), thin, lm.model.spec, thresholds);
    for (const auto& r : rows) {
      out << n << ',' << r.cls << ',' << r.iou_threshold << ',' << std::setprecision(6) << r.ap
          << ',' << r.num_gt << ',' << r.num_det << '\n';
    }
  }
  emit(output, out.str());
  return 0;
}

// ---- bench / gradcheck ---------------------------------------------------

int run_bench(const Common& c, const std::string& input, const std::string& model_dir, int repeat) {
  const Preset p = resolve_preset(c);
  PointCloud cloud;
  if (!input.empty()) {
    cloud = read_cloud(input);
  } else {
    std::mt19937_64 rng(c.seed.value_or(0));
    cloud = generate_synthetic_scene(rng, p.synth).cloud;
  }
  PointGnnModel model{p.model, p.spec, make_initial_params(p.model, p.spec, c.seed.value_or(0))};
  InferenceOptions opt = p.inference;
  if (!model_dir.empty()) {
    LoadedModel lm = load_model(model_dir);
    model = std::move(lm.model);
    opt = lm.preset.inference;
  }
  const PointCloud vertices = voxel_downsample(cloud, opt.voxel_size, opt.voxel_mode, opt.seed).cloud;
  double graph_s = 0, forward_s = 0;
  std::size_t edges = 0;
  for (int i = 0; i < repeat; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    const Graph g = build_graph(vertices, opt.radius);
    graph_s += seconds_since(t0);
    edges = g.edges.size();
    t0 = std::chrono::steady_clock::now();
    (void)forward_full(model, cloud, opt);
    forward_s += seconds_since(t0);
  }
  std::cout << "points " << cloud.size() << "\nvertices " << vertices.size() << "\nedges " << edges
            << "\ngraph_ms " << 1e3 * graph_s / repeat << "\nforward_ms " << 1e3 * forward_s / repeat
            << '\n';
  return 0;
}

int run_gradcheck(const Common& c, int vertices, int probes, double tolerance) {
  const Preset p = resolve_preset(c);
  const auto t0 = std::chrono::steady_clock::now();
  const GradientCheckReport r =
      check_model_gradient(p, static_cast<std::size_t>(vertices), probes, c.seed.value_or(0));
  std::cout << "vertices " << r.vertices << "\nedges " << r.edges << "\nprobes " << r.probes
            << "\nredrawn " << r.redrawn << "\nmax_rel_error " << r.max_rel_error << "\nseconds "
            << seconds_since(t0) << '\n';
  const bool ok = r.probes >= probes && r.max_rel_error < tolerance;
  std::cout << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? 0 : kExitData;
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Large per-step temporaries would otherwise be mmap'd and unmapped on
  // every allocation.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"Graph neural network 3D object detection toolkit"};
  app.require_subcommand(1);
  Common common;

  auto* synth = app.add_subcommand("synth", "Generate synthetic scenes");
  add_common(synth, common);
  int scene_count = 10;
  std::string synth_out = "scenes";
  synth->add_option("--scenes", scene_count, "Number of scenes")->check(CLI::PositiveNumber);
  synth->add_option("--output", synth_out, "Output directory");

  auto* graph = app.add_subcommand("graph", "Build a fixed-radius graph and report statistics");
  add_common(graph, common);
  std::string graph_in, graph_dump;
  std::optional<double> graph_r, graph_voxel;
  bool graph_oracle = false;
  graph->add_option("--input", graph_in, "Point file (.txt or KITTI .bin)")->required();
  graph->add_option("--radius", graph_r, "Connection radius (meters)");
  graph->add_option("--voxel", graph_voxel, "Voxel-downsample first");
  graph->add_option("--output", graph_dump, "Write an edge dump");
  graph->add_flag("--oracle", graph_oracle, "Compare against brute force");

  auto* trn = app.add_subcommand("train", "Train a model on a scene directory");
  add_common(trn, common);
  std::string train_in, train_out = "model";
  std::optional<long> train_steps;
  long ckpt_interval = 0;
  bool quiet = false;
  trn->add_option("--input", train_in, "Scene directory")->required();
  trn->add_option("--output", train_out, "Model directory");
  trn->add_option("--steps", train_steps, "Override total steps");
  trn->add_option("--checkpoint-interval", ckpt_interval, "Save every N steps (0 = only final)");
  trn->add_flag("--quiet", quiet, "No per-step log");

  auto* infer = app.add_subcommand("infer", "Detect objects");
  add_common(infer, common);
  std::string infer_model, infer_in, infer_out;
  infer->add_option("--model", infer_model, "Model directory")->required();
  infer->add_option("--input", infer_in, "Point file or scene directory")->required();
  infer->add_option("--output", infer_out, "Boxes file, or directory for a scene directory");

  std::vector<double> thresholds{0.5, 0.7};
  auto* ev = app.add_subcommand("eval", "Average precision of a model or of saved detections");
  add_common(ev, common);
  std::string eval_model, eval_dets, eval_in, eval_out, eval_iou = "3d";
  ev->add_option("--model", eval_model, "Model directory");
  ev->add_option("--detections", eval_dets, "Directory of scene_NNNN.boxes detections");
  ev->add_option("--input", eval_in, "Scene directory with ground truth")->required();
  ev->add_option("--output", eval_out, "CSV report (default stdout)");
  ev->add_option("--thresholds", thresholds, "IoU thresholds")->delimiter(',');
  ev->add_option("--iou", eval_iou, "3d or bev")->check(CLI::IsMember({"3d", "bev"}));

  auto* ablate = app.add_subcommand("ablate", "Evaluate with components switched off");
  add_common(ablate, common);
  std::string ab_model, ab_in, ab_out, ab_retrain;
  std::vector<std::string> toggles;
  ablate->add_option("--model", ab_model, "Model directory")->required();
  ablate->add_option("--input", ab_in, "Scene directory")->required();
  ablate->add_option("--output", ab_out, "CSV report (default stdout)");
  ablate->add_option("--toggle", toggles, "auto_reg=on|off, merge=on|off, score=on|off, T=n");
  ablate->add_option("--retrain", ab_retrain, "Retrain on this scene directory with the toggles");
  ablate->add_option("--thresholds", thresholds, "IoU thresholds")->delimiter(',');

  auto* sparsity = app.add_subcommand("sparsity", "AP under scan-line thinning");
  add_common(sparsity, common);
  std::string sp_model, sp_in, sp_out;
  std::vector<int> lines{64, 32, 16, 8};
  int source_lines = 64;
  sparsity->add_option("--model", sp_model, "Model directory")->required();
  sparsity->add_option("--input", sp_in, "Scene directory")->required();
  sparsity->add_option("--output", sp_out, "CSV report (default stdout)");
  sparsity->add_option("--lines", lines, "Line counts")->delimiter(',');
  sparsity->add_option("--source-lines", source_lines, "Line count of the input clouds");
  sparsity->add_option("--thresholds", thresholds, "IoU thresholds")->delimiter(',');

  auto* bench = app.add_subcommand("bench", "Time graph construction and the forward pass");
  add_common(bench, common);
  std::string bench_in, bench_model;
  int repeat = 5;
  bench->add_option("--input", bench_in, "Point file (default: a synthetic scene)");
  bench->add_option("--model", bench_model, "Model directory (default: random weights)");
  bench->add_option("--repeat", repeat, "Repetitions")->check(CLI::PositiveNumber);

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the model gradient");
  add_common(gc, common);
  int gc_vertices = 20, gc_probes = 500;
  double gc_tol = 1e-4;
  gc->add_option("--vertices", gc_vertices, "Scene size")->check(CLI::PositiveNumber);
  gc->add_option("--probes", gc_probes, "Probed coordinates")->check(CLI::PositiveNumber);
  gc->add_option("--tolerance", gc_tol, "Maximum relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*synth) return run_synth(common, scene_count, synth_out);
    if (*graph) return run_graph(common, graph_in, graph_r, graph_voxel, graph_oracle, graph_dump);
    if (*trn) return run_train(common, train_in, train_out, train_steps, ckpt_interval, quiet);
    if (*infer) return run_infer(common, infer_model, infer_in, infer_out);
    if (*ev) return run_eval(common, eval_model, eval_dets, eval_in, eval_out, thresholds, eval_iou);
    if (*ablate) return run_ablate(common, ab_model, ab_in, ab_out, toggles, ab_retrain, thresholds);
    if (*sparsity) {
      return run_sparsity(common, sp_model, sp_in, sp_out, lines, source_lines, thresholds);
    }
    if (*bench) return run_bench(common, bench_in, bench_model, repeat);
    if (*gc) return run_gradcheck(common, gc_vertices, gc_probes, gc_tol);
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

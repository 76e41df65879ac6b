#include "pointgnn/config.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include "pointgnn/errors.hpp"
#include "pointgnn/io.hpp"

namespace pgnn {

Preset make_preset(const std::string& name) {
  Preset p;
  p.name = name;
  if (name == "car") {
    p.spec = ClassSpec::car();
    p.model.state_width = 300;
    p.model.embed_point_units = {32, 64, 128, 300};
    p.model.embed_post_units = {300, 300};
    p.model.mlp_f_units = {300, 300};
    p.model.mlp_g_units = {300, 300};
    p.model.iterations = 3;
    p.train.schedule = {0.125, 0.1, 400000};
    p.train.total_steps = 1400000;
    p.train.voxel_size = 0.8;
    p.train.radius = 4.0;
    p.train.r0 = 1.0;
    p.inference.voxel_size = 0.4;
    p.inference.nms.overlap_threshold = 0.01;
  } else if (name == "pedcyc") {
    p.spec = ClassSpec::pedestrian_cyclist();
    p.model.state_width = 256;
    p.model.embed_point_units = {32, 64, 128, 256, 512};
    p.model.embed_post_units = {256, 256};
    p.model.mlp_f_units = {256, 256};
    p.model.mlp_g_units = {256, 256};
    p.model.iterations = 3;
    p.train.schedule = {0.32, 0.25, 400000};
    p.train.total_steps = 1000000;
    p.train.voxel_size = 0.4;
    p.train.radius = 1.6;
    p.train.r0 = 0.4;
    p.inference.voxel_size = 0.2;
    p.inference.nms.overlap_threshold = 0.2;
    p.synth.objects = {{"Pedestrian", 0.88, 1.77, 0.65}, {"Cyclist", 1.76, 1.75, 0.6}};
    p.synth.x_min = 5.0;
    p.synth.x_max = 20.0;
    p.synth.min_gap = 0.3;
    p.synth.surface_density = 150.0;
  } else if (name == "toy") {
    // Car classes and radii at desk scale: widths shrunk to a 64-wide state,
    // layer counts preserved, two iterations.
    p.spec = ClassSpec::car();
    p.model.state_width = 64;
    p.model.embed_point_units = {8, 16, 32, 64};
    p.model.embed_post_units = {64, 64};
    p.model.mlp_f_units = {64, 64};
    p.model.mlp_g_units = {64, 64};
    p.model.iterations = 2;
    p.train.batch_size = 1;
    // Classification weight raised from 0.1: with few steps the car/background
    // split otherwise stays undertrained.
    p.train.weights.alpha = 1.0;
    p.train.schedule = {0.125, 0.1, 400000};
    p.train.total_steps = 3000;
    p.train.voxel_size = 0.8;
    p.train.radius = 4.0;
    p.train.r0 = 1.0;
    p.inference.voxel_size = 0.8;
    p.inference.nms.overlap_threshold = 0.01;
  } else {
    throw ArgumentError("unknown preset '" + name + "' (expected car, pedcyc or toy)");
  }
  p.inference.radius = p.train.radius;
  p.inference.r0 = p.train.r0;
  if (name != "pedcyc") p.synth.objects = {{"Car", 3.88, 1.5, 1.63}};
  return p;
}

KeyValues parse_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("config: missing '=' on line " + std::to_string(lineno));
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  return parse_key_values(in);
}

namespace {

double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ArgumentError("config: " + key + " expects a number, got '" + v + "'");
  }
  return out;
}

long to_long(const std::string& key, const std::string& v) {
  long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ArgumentError("config: " + key + " expects an integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw ArgumentError("config: " + key + " expects a boolean, got '" + v + "'");
}

// Keeps empty fields, including a trailing one ("a," gives {"a", ""}).
std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = s.find(sep, start);
    out.push_back(s.substr(start, end - start));
    if (end == std::string::npos) return out;
    start = end + 1;
  }
}

std::vector<int> to_units(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (const auto& item : split(v, ',')) out.push_back(static_cast<int>(to_long(key, item)));
  return out;
}

std::string join(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string num(double v) {
  std::ostringstream ss;
  ss << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return ss.str();
}

ClassInfo parse_class(const std::string& key, const std::string& v) {
  const auto f = split(v, ',');
  if (f.size() == 2) return {f[0], f[1], std::nullopt};
  if (f.size() == 7) {
    return {f[0], f[1],
            BoxConstants{to_double(key, f[2]), to_double(key, f[3]), to_double(key, f[4]),
                         to_double(key, f[5]), to_double(key, f[6])}};
  }
  throw ArgumentError("config: " + key + " expects name,object[,l,h,w,theta0,theta_m]");
}

std::string class_text(const ClassInfo& c) {
  std::string out = c.name + "," + c.object;
  if (c.constants) {
    const auto& k = *c.constants;
    out += "," + num(k.l_m) + "," + num(k.h_m) + "," + num(k.w_m) + "," + num(k.theta0) + "," +
           num(k.theta_m);
  }
  return out;
}

}  // namespace

void apply_config(Preset& p, const KeyValues& kv) {
  std::map<int, ClassInfo> classes;
  for (const auto& [key, v] : kv) {
    if (key == "preset") continue;
    if (key == "state_width") p.model.state_width = static_cast<int>(to_long(key, v));
    else if (key == "embed_point_units") p.model.embed_point_units = to_units(key, v);
    else if (key == "embed_post_units") p.model.embed_post_units = to_units(key, v);
    else if (key == "mlp_h_units") p.model.mlp_h_units = to_units(key, v);
    else if (key == "mlp_f_units") p.model.mlp_f_units = to_units(key, v);
    else if (key == "mlp_g_units") p.model.mlp_g_units = to_units(key, v);
    else if (key == "cls_hidden_units") p.model.cls_hidden_units = v.empty() ? std::vector<int>{} : to_units(key, v);
    else if (key == "loc_units") p.model.loc_units = to_units(key, v);
    else if (key == "iterations") p.model.iterations = static_cast<int>(to_long(key, v));
    else if (key == "auto_registration") p.model.auto_registration = to_bool(key, v);
    else if (key == "radius") p.train.radius = p.inference.radius = to_double(key, v);
    else if (key == "r0") p.train.r0 = p.inference.r0 = to_double(key, v);
    else if (key == "voxel_train") p.train.voxel_size = to_double(key, v);
    else if (key == "voxel_infer") p.inference.voxel_size = to_double(key, v);
    else if (key == "nms_threshold") p.inference.nms.overlap_threshold = to_double(key, v);
    else if (key == "nms_merge" || key == "nms_score") {
      bool merge = p.inference.nms.mode == NmsMode::kMergeScore || p.inference.nms.mode == NmsMode::kMergeOnly;
      bool score = p.inference.nms.mode == NmsMode::kMergeScore || p.inference.nms.mode == NmsMode::kScoreOnly;
      (key == "nms_merge" ? merge : score) = to_bool(key, v);
      p.inference.nms.mode = parse_nms_mode(merge, score);
    }
    else if (key == "batch_size") p.train.batch_size = static_cast<int>(to_long(key, v));
    else if (key == "alpha") p.train.weights.alpha = to_double(key, v);
    else if (key == "beta") p.train.weights.beta = to_double(key, v);
    else if (key == "gamma") p.train.weights.gamma = to_double(key, v);
    else if (key == "learning_rate") p.train.schedule.initial = to_double(key, v);
    else if (key == "decay_rate") p.train.schedule.decay_rate = to_double(key, v);
    else if (key == "decay_interval") p.train.schedule.decay_interval = to_long(key, v);
    else if (key == "total_steps") p.train.total_steps = to_long(key, v);
    else if (key == "seed") p.train.seed = static_cast<std::uint64_t>(to_long(key, v));
    else if (key == "aug_rotate") p.train.augment.rotate = to_bool(key, v);
    else if (key == "aug_flip") p.train.augment.flip = to_bool(key, v);
    else if (key == "aug_translate") p.train.augment.translate = to_bool(key, v);
    else if (key == "max_in_edges") p.train.max_in_edges = static_cast<std::size_t>(to_long(key, v));
    else if (key == "synth_min_boxes") p.synth.min_boxes = static_cast<int>(to_long(key, v));
    else if (key == "synth_max_boxes") p.synth.max_boxes = static_cast<int>(to_long(key, v));
    else if (key == "synth_density") p.synth.surface_density = to_double(key, v);
    else if (key == "synth_clutter") p.synth.clutter_points = static_cast<int>(to_long(key, v));
    else if (key == "synth_noise") p.synth.noise = to_double(key, v);
    else if (key == "synth_x_min") p.synth.x_min = to_double(key, v);
    else if (key == "synth_x_max") p.synth.x_max = to_double(key, v);
    else if (key.starts_with("class.")) {
      classes[static_cast<int>(to_long(key, key.substr(6)))] = parse_class(key, v);
    } else {
      throw ArgumentError("config: unknown key '" + key + "'");
    }
  }
  if (!classes.empty()) {
    ClassSpec spec;
    int expect = 0;
    for (auto& [idx, info] : classes) {
      if (idx != expect++) throw ArgumentError("config: class indices must be contiguous from 0");
      spec.classes.push_back(std::move(info));
    }
    if (spec.size() < 3) throw ArgumentError("config: need Background, a localized class and DoNotCare");
    p.spec = std::move(spec);
  }
  p.model.validate();
}

Preset preset_from_config(const KeyValues& kv) {
  const auto it = kv.find("preset");
  Preset p = make_preset(it == kv.end() ? "toy" : it->second);
  apply_config(p, kv);
  return p;
}

std::string manifest_text(const Preset& p) {
  std::ostringstream out;
  out << "preset=" << p.name << '\n'
      << "state_width=" << p.model.state_width << '\n'
      << "embed_point_units=" << join(p.model.embed_point_units) << '\n'
      << "embed_post_units=" << join(p.model.embed_post_units) << '\n'
      << "mlp_h_units=" << join(p.model.mlp_h_units) << '\n'
      << "mlp_f_units=" << join(p.model.mlp_f_units) << '\n'
      << "mlp_g_units=" << join(p.model.mlp_g_units) << '\n'
      << "cls_hidden_units=" << join(p.model.cls_hidden_units) << '\n'
      << "loc_units=" << join(p.model.loc_units) << '\n'
      << "iterations=" << p.model.iterations << '\n'
      << "auto_registration=" << (p.model.auto_registration ? 1 : 0) << '\n'
      << "radius=" << num(p.train.radius) << '\n'
      << "r0=" << num(p.train.r0) << '\n'
      << "voxel_train=" << num(p.train.voxel_size) << '\n'
      << "voxel_infer=" << num(p.inference.voxel_size) << '\n'
      << "nms_threshold=" << num(p.inference.nms.overlap_threshold) << '\n';
  for (int c = 0; c < p.spec.size(); ++c) out << "class." << c << '=' << class_text(p.spec.classes[c]) << '\n';
  return out.str();
}

std::string config_text(const Preset& p) {
  const bool merge = p.inference.nms.mode == NmsMode::kMergeScore || p.inference.nms.mode == NmsMode::kMergeOnly;
  const bool score = p.inference.nms.mode == NmsMode::kMergeScore || p.inference.nms.mode == NmsMode::kScoreOnly;
  std::ostringstream out;
  out << manifest_text(p) << "nms_merge=" << merge << '\n'
      << "nms_score=" << score << '\n'
      << "batch_size=" << p.train.batch_size << '\n'
      << "alpha=" << num(p.train.weights.alpha) << '\n'
      << "beta=" << num(p.train.weights.beta) << '\n'
      << "gamma=" << num(p.train.weights.gamma) << '\n'
      << "learning_rate=" << num(p.train.schedule.initial) << '\n'
      << "decay_rate=" << num(p.train.schedule.decay_rate) << '\n'
      << "decay_interval=" << p.train.schedule.decay_interval << '\n'
      << "total_steps=" << p.train.total_steps << '\n'
      << "seed=" << p.train.seed << '\n'
      << "aug_rotate=" << p.train.augment.rotate << '\n'
      << "aug_flip=" << p.train.augment.flip << '\n'
      << "aug_translate=" << p.train.augment.translate << '\n'
      << "max_in_edges=" << p.train.max_in_edges << '\n'
      << "synth_min_boxes=" << p.synth.min_boxes << '\n'
      << "synth_max_boxes=" << p.synth.max_boxes << '\n'
      << "synth_density=" << num(p.synth.surface_density) << '\n'
      << "synth_clutter=" << p.synth.clutter_points << '\n'
      << "synth_noise=" << num(p.synth.noise) << '\n'
      << "synth_x_min=" << num(p.synth.x_min) << '\n'
      << "synth_x_max=" << num(p.synth.x_max) << '\n';
  return out.str();
}

namespace {

std::string scene_stem(std::size_t index) {
  std::ostringstream ss;
  ss << "scene_" << std::setw(4) << std::setfill('0') << index;
  return ss.str();
}

}  // namespace

void write_scene(const std::string& dir, std::size_t index, const Scene& scene) {
  std::filesystem::create_directories(dir);
  const std::string stem = (std::filesystem::path(dir) / scene_stem(index)).string();
  std::ostringstream pts, boxes;
  write_point_text(pts, scene.cloud);
  write_boxes_text(boxes, scene.boxes);
  write_file_atomic(stem + ".txt", pts.str());
  write_file_atomic(stem + ".boxes", boxes.str());
}

std::vector<std::string> scene_names(const std::string& dir) {
  std::vector<std::string> stems;
  if (!std::filesystem::is_directory(dir)) throw FormatError("not a directory: " + dir);
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto& path = entry.path();
    if (path.extension() == ".txt" && path.stem().string().starts_with("scene_")) {
      stems.push_back((path.parent_path() / path.stem()).string());
    }
  }
  std::sort(stems.begin(), stems.end());
  return stems;
}

std::vector<Scene> read_scene_dir(const std::string& dir) {
  std::vector<Scene> scenes;
  for (const auto& stem : scene_names(dir)) {
    Scene s;
    s.cloud = read_point_text(stem + ".txt");
    if (std::filesystem::exists(stem + ".boxes")) s.boxes = read_boxes_text(stem + ".boxes");
    scenes.push_back(std::move(s));
  }
  return scenes;
}

}  // namespace pgnn

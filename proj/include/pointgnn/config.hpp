#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "pointgnn/model.hpp"
#include "pointgnn/training.hpp"

namespace pgnn {

// Everything needed to build, train and run one detector.
struct Preset {
  std::string name;
  ClassSpec spec;
  ModelConfig model;
  TrainConfig train;
  InferenceOptions inference;
  SyntheticSpec synth;
};

// "car", "pedcyc" or "toy".
Preset make_preset(const std::string& name);

using KeyValues = std::map<std::string, std::string>;

// `key=value` lines; `#` starts a comment line.
KeyValues parse_key_values(std::istream& in);
KeyValues read_key_values(const std::string& path);

// Applies overrides; unknown keys or bad values throw ArgumentError.
void apply_config(Preset& preset, const KeyValues& kv);
// Builds a preset from a config: starts from kv["preset"] (default toy).
Preset preset_from_config(const KeyValues& kv);

// Model manifest: the config keys that define architecture, classes and
// graph settings. Reading it back through preset_from_config restores them.
std::string manifest_text(const Preset& preset);
// Every supported key with its current value.
std::string config_text(const Preset& preset);

// Scene directories hold `scene_NNNN.txt` (points) and `scene_NNNN.boxes`.
void write_scene(const std::string& dir, std::size_t index, const Scene& scene);
std::vector<Scene> read_scene_dir(const std::string& dir);
std::vector<std::string> scene_names(const std::string& dir);

}  // namespace pgnn

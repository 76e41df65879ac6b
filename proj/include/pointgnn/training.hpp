#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "pointgnn/boxes.hpp"
#include "pointgnn/model.hpp"

namespace pgnn {

struct Scene {
  PointCloud cloud;
  std::vector<LabeledBox> boxes;
};

struct AugmentOptions {
  bool rotate = true;
  bool flip = true;
  bool translate = true;
  double rotate_sigma = 0.39269908169872414;  // pi / 8
  double translate_sigma = 3.0;
  double flip_probability = 0.5;
  double box_margin = 1.1;  // points within this scaled box move with it
  int max_attempts = 10;
};

struct AugmentReport {
  double rotation = 0.0;
  bool flipped = false;
  int translated = 0;
  int skipped = 0;  // boxes left in place after max_attempts collisions
};

// Rotates points, box centers and yaws about the vertical axis.
Scene rotate_scene(const Scene& scene, double angle);
// Mirrors across the x axis: y -> -y, yaw -> -yaw.
Scene flip_scene(const Scene& scene);
Scene augment_scene(const Scene& scene, std::mt19937_64& rng, const AugmentOptions& options,
                    AugmentReport* report = nullptr);

struct ObjectTemplate {
  std::string name;
  double l = 3.88;
  double h = 1.5;
  double w = 1.63;
};

struct SyntheticSpec {
  std::vector<ObjectTemplate> objects{{"Car", 3.88, 1.5, 1.63}};
  int min_boxes = 2;
  int max_boxes = 5;
  double size_jitter = 0.2;      // sizes uniform in median * (1 +- jitter)
  double x_min = 6.0;            // forward placement range of box centers
  double x_max = 32.0;
  double half_fov = 0.6981317;   // 40 degrees
  double ground_z = -1.73;       // sensor height above ground
  double surface_density = 30.0; // points per square meter of visible face
  double noise = 0.02;
  int clutter_points = 300;
  double min_gap = 0.5;          // clearance between footprints, meters
  int max_placement_tries = 500;
};

// Box surfaces facing the sensor plus ground clutter. Throws GenerationError
// if the boxes cannot be placed without overlap.
Scene generate_synthetic_scene(std::mt19937_64& rng, const SyntheticSpec& spec);

// Staircase decay.
struct LrSchedule {
  double initial = 0.125;
  double decay_rate = 0.1;
  long decay_interval = 400000;
};
double lr_schedule(long step, const LrSchedule& schedule);

// params -= lr * grads. Throws TrainingError naming the first non-finite
// gradient tensor.
void sgd_step(PointGnnParams& params, const PointGnnParams& grads, double lr);

struct TrainConfig {
  int batch_size = 4;
  LossWeights weights;
  LrSchedule schedule;
  long total_steps = 1000;
  std::uint64_t seed = 0;
  AugmentOptions augment;
  double voxel_size = 0.8;
  double radius = 4.0;
  double r0 = 1.0;
  std::size_t max_in_edges = 256;
  long log_interval = 1;
};

struct LossRecord {
  long step = 0;
  double cls = 0;
  double loc = 0;
  double reg = 0;
  double total = 0;
  double lr = 0;
};

struct TrainResult {
  PointGnnParams params;
  std::vector<LossRecord> curve;
};

using CheckpointCallback = std::function<void(long step, const PointGnnParams& params)>;
using ProgressCallback = std::function<void(const LossRecord&)>;

// Drops scenes with no box of a localized object class.
std::vector<Scene> scenes_with_objects(const std::vector<Scene>& scenes, const ClassSpec& spec);

// SGD over `scenes` starting from `model.params`.
TrainResult train(const PointGnnModel& model, const TrainConfig& config,
                  const std::vector<Scene>& scenes, const CheckpointCallback& on_checkpoint = {},
                  long checkpoint_interval = 0, const ProgressCallback& on_progress = {});

// CSV `step,l_cls,l_loc,l_reg,total,lr`.
void write_loss_curve(std::ostream& out, const std::vector<LossRecord>& curve);

}  // namespace pgnn

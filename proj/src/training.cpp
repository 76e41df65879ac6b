#include "pointgnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "pointgnn/errors.hpp"

namespace pgnn {

namespace {

Vec3 rotate_z(const Vec3& p, double c, double s) {
  return {c * p.x() - s * p.y(), s * p.x() + c * p.y(), p.z()};
}

bool inside_footprint(const Vec3& p, const Box3D& box) {
  return point_in_box(Vec3(p.x(), p.y(), box.center.z()), box);
}

// Lowest tenth of a box is where it meets the ground; ground clutter there
// does not count as a collision.
bool collides_with_point(const Vec3& p, const Box3D& box) {
  if (!point_in_box(p, box)) return false;
  return p.z() > box.center.z() - box.h / 2 + 0.1 * box.h;
}

}  // namespace

Scene rotate_scene(const Scene& scene, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Scene out = scene;
  for (auto& p : out.cloud.points) p.position = rotate_z(p.position, c, s);
  for (auto& b : out.boxes) {
    b.box.center = rotate_z(b.box.center, c, s);
    b.box.yaw += angle;
  }
  return out;
}

Scene flip_scene(const Scene& scene) {
  Scene out = scene;
  for (auto& p : out.cloud.points) p.position.y() = -p.position.y();
  for (auto& b : out.boxes) {
    b.box.center.y() = -b.box.center.y();
    b.box.yaw = -b.box.yaw;
  }
  return out;
}

Scene augment_scene(const Scene& scene, std::mt19937_64& rng, const AugmentOptions& options,
                    AugmentReport* report) {
  AugmentReport rep;
  Scene out = scene;
  if (options.rotate) {
    std::normal_distribution<double> angle(0.0, options.rotate_sigma);
    rep.rotation = angle(rng);
    out = rotate_scene(out, rep.rotation);
  }
  if (options.flip) {
    std::bernoulli_distribution coin(options.flip_probability);
    if (coin(rng)) {
      rep.flipped = true;
      out = flip_scene(out);
    }
  }
  if (options.translate && !out.boxes.empty()) {
    // Which box (if any) carries each point.
    std::vector<int> owner(out.cloud.size(), -1);
    for (std::size_t i = 0; i < out.cloud.size(); ++i) {
      for (std::size_t b = 0; b < out.boxes.size(); ++b) {
        if (point_in_box(out.cloud[i].position, out.boxes[b].box.scaled(options.box_margin))) {
          owner[i] = static_cast<int>(b);
          break;
        }
      }
    }
    std::normal_distribution<double> shift(0.0, options.translate_sigma);
    for (std::size_t b = 0; b < out.boxes.size(); ++b) {
      bool moved = false;
      for (int attempt = 0; attempt < options.max_attempts && !moved; ++attempt) {
        const Vec3 delta(shift(rng), shift(rng), 0.0);
        Box3D candidate = out.boxes[b].box;
        candidate.center += delta;
        bool collision = false;
        for (std::size_t o = 0; o < out.boxes.size() && !collision; ++o) {
          if (o != b && bev_iou(candidate, out.boxes[o].box) > 0) collision = true;
        }
        for (std::size_t i = 0; i < out.cloud.size() && !collision; ++i) {
          if (owner[i] < 0 && collides_with_point(out.cloud[i].position, candidate)) collision = true;
        }
        if (collision) continue;
        for (std::size_t i = 0; i < out.cloud.size(); ++i) {
          if (owner[i] == static_cast<int>(b)) out.cloud[i].position += delta;
        }
        out.boxes[b].box = candidate;
        moved = true;
      }
      moved ? ++rep.translated : ++rep.skipped;
    }
  }
  if (report) *report = rep;
  return out;
}

Scene generate_synthetic_scene(std::mt19937_64& rng, const SyntheticSpec& spec) {
  if (spec.objects.empty() || spec.min_boxes < 0 || spec.max_boxes < spec.min_boxes ||
      !(spec.x_max > spec.x_min) || !(spec.x_min > 0) || spec.size_jitter < 0 ||
      spec.size_jitter >= 1 || spec.noise < 0 || spec.surface_density < 0) {
    throw ArgumentError("generate_synthetic_scene: invalid spec");
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  Scene scene;
  std::uniform_int_distribution<int> count(spec.min_boxes, spec.max_boxes);
  const int k = count(rng);
  std::uniform_int_distribution<std::size_t> pick(0, spec.objects.size() - 1);
  const double tan_fov = std::tan(spec.half_fov);

  for (int n = 0; n < k; ++n) {
    const ObjectTemplate& tmpl = spec.objects[pick(rng)];
    bool placed = false;
    for (int attempt = 0; attempt < spec.max_placement_tries && !placed; ++attempt) {
      Box3D b;
      b.l = tmpl.l * uniform(1 - spec.size_jitter, 1 + spec.size_jitter);
      b.h = tmpl.h * uniform(1 - spec.size_jitter, 1 + spec.size_jitter);
      b.w = tmpl.w * uniform(1 - spec.size_jitter, 1 + spec.size_jitter);
      b.yaw = uniform(-std::numbers::pi, std::numbers::pi);
      const double x = uniform(spec.x_min, spec.x_max);
      const double half_lat = std::max(0.0, x * tan_fov - 0.5 * std::hypot(b.l, b.w));
      b.center = Vec3(x, uniform(-half_lat, half_lat), spec.ground_z + b.h / 2);

      Box3D padded = b;
      padded.l += 2 * spec.min_gap;
      padded.w += 2 * spec.min_gap;
      bool clear = true;
      for (const auto& other : scene.boxes) {
        Box3D op = other.box;
        op.l += 2 * spec.min_gap;
        op.w += 2 * spec.min_gap;
        if (bev_iou(padded, op) > 0) clear = false;
      }
      if (!clear) continue;
      scene.boxes.push_back({tmpl.name, b, std::nullopt});
      placed = true;
    }
    if (!placed) throw GenerationError("generate_synthetic_scene: could not place box " + std::to_string(n));
  }

  std::normal_distribution<double> jitter(0.0, spec.noise);
  for (const auto& lb : scene.boxes) {
    const Box3D& b = lb.box;
    const Box3D loose = b.scaled(1.1);
    struct Face {
      Vec3 normal;
      Vec3 u;
      Vec3 v;
      double half_u;
      double half_v;
      double offset;
    };
    const Vec3 al = b.axis_l();
    const Vec3 aw = b.axis_w();
    const Vec3 ah = Box3D::axis_h();
    const Face faces[6] = {
        {al, aw, ah, b.w / 2, b.h / 2, b.l / 2},  {-al, aw, ah, b.w / 2, b.h / 2, b.l / 2},
        {aw, al, ah, b.l / 2, b.h / 2, b.w / 2},  {-aw, al, ah, b.l / 2, b.h / 2, b.w / 2},
        {ah, al, aw, b.l / 2, b.w / 2, b.h / 2},  {-ah, al, aw, b.l / 2, b.w / 2, b.h / 2},
    };
    for (const Face& f : faces) {
      const Vec3 face_center = b.center + f.normal * f.offset;
      if (f.normal.dot(-face_center) <= 0) continue;  // faces away from the sensor
      const double area = 4 * f.half_u * f.half_v;
      const auto n_points = static_cast<int>(std::lround(area * spec.surface_density));
      for (int i = 0; i < n_points; ++i) {
        const Vec3 on_face =
            face_center + f.u * uniform(-f.half_u, f.half_u) + f.v * uniform(-f.half_v, f.half_v);
        Vec3 p = on_face;
        if (spec.noise > 0) {
          // Truncated so the point stays inside the 110% box.
          for (int tries = 0; tries < 20; ++tries) {
            p = on_face + Vec3(jitter(rng), jitter(rng), jitter(rng));
            if (point_in_box(p, loose)) break;
            p = on_face;
          }
        }
        scene.cloud.points.push_back(Point{p, unit(rng)});
      }
    }
  }

  for (int i = 0; i < spec.clutter_points; ++i) {
    const double x = uniform(spec.x_min - 4, spec.x_max + 4);
    const double half_lat = x * tan_fov;
    Vec3 p(x, uniform(-half_lat, half_lat), spec.ground_z + (spec.noise > 0 ? jitter(rng) : 0.0));
    const double intensity = unit(rng);
    bool under_box = false;
    for (const auto& lb : scene.boxes) {
      if (inside_footprint(p, lb.box.scaled(1.1))) under_box = true;
    }
    if (!under_box) scene.cloud.points.push_back(Point{p, intensity});
  }
  return scene;
}

double lr_schedule(long step, const LrSchedule& schedule) {
  if (step < 0) throw ArgumentError("lr_schedule: negative step");
  if (schedule.decay_interval <= 0) throw ArgumentError("lr_schedule: decay_interval must be > 0");
  const long stairs = step / schedule.decay_interval;
  return schedule.initial * std::pow(schedule.decay_rate, static_cast<double>(stairs));
}

void sgd_step(PointGnnParams& params, const PointGnnParams& grads, double lr) {
  std::vector<std::pair<std::string, const double*>> g;
  std::vector<Eigen::Index> sizes;
  visit_params(grads, [&](const std::string& name, const auto& t) {
    if (!t.allFinite()) throw TrainingError("non-finite gradient in " + name);
    g.emplace_back(name, t.data());
    sizes.push_back(t.size());
  });
  std::size_t idx = 0;
  visit_params(params, [&](const std::string& name, auto& t) {
    if (idx >= g.size() || g[idx].first != name || sizes[idx] != t.size()) {
      throw ArgumentError("sgd_step: gradient structure does not match parameters");
    }
    const double* gd = g[idx].second;
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] -= lr * gd[i];
    ++idx;
  });
}

std::vector<Scene> scenes_with_objects(const std::vector<Scene>& scenes, const ClassSpec& spec) {
  std::vector<Scene> out;
  for (const auto& s : scenes) {
    const bool any = std::any_of(s.boxes.begin(), s.boxes.end(), [&](const LabeledBox& b) {
      return spec.class_for(b.cls, b.box.yaw) >= 0;
    });
    if (any) out.push_back(s);
  }
  return out;
}

TrainResult train(const PointGnnModel& model, const TrainConfig& config,
                  const std::vector<Scene>& scenes, const CheckpointCallback& on_checkpoint,
                  long checkpoint_interval, const ProgressCallback& on_progress) {
  if (config.batch_size < 1) throw ArgumentError("train: batch_size must be >= 1");
  if (config.total_steps < 0) throw ArgumentError("train: total_steps must be >= 0");
  const std::vector<Scene> usable = scenes_with_objects(scenes, model.spec);
  if (usable.empty()) throw ArgumentError("train: no scenes with objects of interest");

  TrainResult result;
  result.params = model.params;
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(usable.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;

  for (long step = 0; step < config.total_steps; ++step) {
    const double lr = lr_schedule(step, config.schedule);
    PointGnnParams grad = result.params.zeros_like();
    LossRecord rec;
    rec.step = step;
    rec.lr = lr;
    for (int b = 0; b < config.batch_size; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const Scene scene = augment_scene(usable[order[cursor++]], rng, config.augment);
      const auto down = voxel_downsample(scene.cloud, config.voxel_size, VoxelMode::kRandom, rng());
      const Graph graph = cap_edges(build_graph(down.cloud, config.radius), config.max_in_edges, rng());
      const auto labels = assign_vertex_labels(graph.vertices, scene.boxes, model.spec);
      const LossBreakdown loss =
          loss_and_gradient(result.params, model.config, model.spec, scene.cloud, graph, config.r0,
                            labels, config.weights, &grad, 1.0 / config.batch_size);
      if (!std::isfinite(loss.total)) {
        throw TrainingError("non-finite loss at step " + std::to_string(step) +
                            " (cls=" + std::to_string(loss.cls) + ", loc=" + std::to_string(loss.loc) +
                            ", reg=" + std::to_string(loss.reg) + ")");
      }
      rec.cls += loss.cls / config.batch_size;
      rec.loc += loss.loc / config.batch_size;
      rec.reg += loss.reg / config.batch_size;
      rec.total += loss.total / config.batch_size;
    }
    sgd_step(result.params, grad, lr);
    if (config.log_interval > 0 && step % config.log_interval == 0) result.curve.push_back(rec);
    if (on_progress) on_progress(rec);
    if (on_checkpoint && checkpoint_interval > 0 && (step + 1) % checkpoint_interval == 0) {
      on_checkpoint(step + 1, result.params);
    }
  }
  return result;
}

void write_loss_curve(std::ostream& out, const std::vector<LossRecord>& curve) {
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  out << "step,l_cls,l_loc,l_reg,total,lr\n";
  for (const auto& r : curve) {
    out << r.step << ',' << r.cls << ',' << r.loc << ',' << r.reg << ',' << r.total << ',' << r.lr << '\n';
  }
  out.precision(old_precision);
}

}  // namespace pgnn

#include "pointgnn/diagnostics.hpp"

#include <algorithm>
#include <random>

#include "pointgnn/errors.hpp"

namespace pgnn {

std::vector<Edge> brute_force_edges(const PointCloud& cloud, double radius, bool include_self) {
  std::vector<Edge> edges;
  const double r2 = radius * radius;
  for (std::size_t d = 0; d < cloud.size(); ++d) {
    for (std::size_t s = 0; s < cloud.size(); ++s) {
      if (s == d && !include_self) continue;
      if ((cloud[s].position - cloud[d].position).squaredNorm() < r2) {
        edges.push_back({static_cast<std::int32_t>(s), static_cast<std::int32_t>(d)});
      }
    }
  }
  return edges;
}

GradientCheckReport check_model_gradient(const Preset& preset, std::size_t vertex_count,
                                         int probes, std::uint64_t seed) {
  if (vertex_count == 0) throw ArgumentError("gradient check needs at least one vertex");
  std::mt19937_64 rng(seed);
  SyntheticSpec synth = preset.synth;
  synth.min_boxes = 1;
  synth.max_boxes = 1;
  const Scene scene = generate_synthetic_scene(rng, synth);

  // Vertices: the downsampled points nearest the object.
  const auto down = voxel_downsample(scene.cloud, preset.train.voxel_size, VoxelMode::kRandom, seed);
  std::vector<Point> pts = down.cloud.points;
  const Vec3 c = scene.boxes.front().box.center;
  std::stable_sort(pts.begin(), pts.end(), [&](const Point& a, const Point& b) {
    return (a.position - c).squaredNorm() < (b.position - c).squaredNorm();
  });
  if (pts.size() < vertex_count) throw GenerationError("gradient check: scene has too few points");
  pts.resize(vertex_count);
  PointCloud vertices;
  vertices.points = std::move(pts);

  // Raw points: only those near a vertex matter; keeping the set small keeps
  // each loss evaluation cheap.
  PointCloud raw;
  const double r0 = preset.train.r0;
  for (const auto& p : scene.cloud.points) {
    for (const auto& v : vertices.points) {
      if ((p.position - v.position).norm() <= r0) {
        raw.points.push_back(p);
        break;
      }
    }
  }

  const Graph graph = build_graph(vertices, preset.train.radius);
  const auto labels = assign_vertex_labels(vertices, scene.boxes, preset.spec);

  ModelConfig config = preset.model;
  PointGnnParams params = make_initial_params(config, preset.spec, seed + 1);
  std::normal_distribution<double> small(0.0, 0.1);
  for (auto& it : params.iterations) glorot_init(it.mlp_h, rng);
  visit_params(params, [&](const std::string& name, auto& t) {
    if (name.ends_with(".bias")) {
      for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = small(rng);
    }
  });

  PointGnnParams grad = params.zeros_like();
  loss_and_gradient(params, config, preset.spec, raw, graph, r0, labels, preset.train.weights,
                    &grad);

  std::vector<GradSlot> slots;
  std::vector<const double*> grad_ptrs;
  visit_params(grad, [&](const std::string&, const auto& t) { grad_ptrs.push_back(t.data()); });
  std::size_t idx = 0;
  visit_params(params, [&](const std::string&, auto& t) {
    const auto n = static_cast<std::size_t>(t.size());
    slots.push_back({std::span<double>(t.data(), n), std::span<const double>(grad_ptrs[idx++], n)});
  });

  auto loss = [&] {
    return loss_and_gradient(params, config, preset.spec, raw, graph, r0, labels,
                             preset.train.weights, nullptr)
        .total;
  };
  GradCheckOptions opts;
  opts.probes = probes;
  opts.seed = seed + 2;
  opts.fingerprint = [&] {
    ForwardTape tape;
    PointGnnParams* none = nullptr;
    loss_and_gradient(params, config, preset.spec, raw, graph, r0, labels, preset.train.weights,
                      none, 1.0, &tape);
    return activation_fingerprint(tape);
  };
  const GradCheckResult r = grad_check(loss, slots, opts);

  GradientCheckReport report;
  report.max_rel_error = r.max_rel_error;
  report.probes = r.probes;
  report.redrawn = r.redrawn;
  report.vertices = vertices.size();
  report.edges = graph.edges.size();
  return report;
}

}  // namespace pgnn

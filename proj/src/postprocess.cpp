#include "pointgnn/postprocess.hpp"

#include <algorithm>

#include "pointgnn/errors.hpp"

namespace pgnn {

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

Box3D median_box(std::span<const Box3D> cluster, MedianYaw yaw_mode, std::size_t seed) {
  if (cluster.empty()) throw ArgumentError("median_box: empty cluster");
  auto component = [&](auto get) {
    std::vector<double> v;
    v.reserve(cluster.size());
    for (const auto& b : cluster) v.push_back(get(b));
    return median_of(std::move(v));
  };
  Box3D m;
  m.center = Vec3(component([](const Box3D& b) { return b.center.x(); }),
                  component([](const Box3D& b) { return b.center.y(); }),
                  component([](const Box3D& b) { return b.center.z(); }));
  m.l = component([](const Box3D& b) { return b.l; });
  m.h = component([](const Box3D& b) { return b.h; });
  m.w = component([](const Box3D& b) { return b.w; });
  if (yaw_mode == MedianYaw::kSeed) {
    if (seed >= cluster.size()) throw ArgumentError("median_box: seed out of range");
    m.yaw = cluster[seed].yaw;
  } else if (cluster.size() == 1) {
    m.yaw = cluster[0].yaw;
  } else {
    m.yaw = component([](const Box3D& b) { return normalize_yaw(b.yaw); });
  }
  return m;
}

NmsResult merge_score_nms(std::span<const Box3D> boxes, std::span<const double> scores,
                          const PointCloud& points, const NmsOptions& options) {
  if (boxes.size() != scores.size()) {
    throw ArgumentError("merge_score_nms: boxes and scores differ in length");
  }
  if (!(options.overlap_threshold >= 0 && options.overlap_threshold <= 1)) {
    throw ArgumentError("merge_score_nms: threshold must be in [0, 1]");
  }
  const bool merge = options.mode == NmsMode::kMergeScore || options.mode == NmsMode::kMergeOnly;
  const bool rescore = options.mode == NmsMode::kMergeScore || options.mode == NmsMode::kScoreOnly;

  std::vector<std::size_t> remaining(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) remaining[i] = i;

  NmsResult out;
  while (!remaining.empty()) {
    // Highest score; `remaining` stays in index order so ties go to the lowest index.
    std::size_t seed = remaining.front();
    for (std::size_t idx : remaining) {
      if (scores[idx] > scores[seed]) seed = idx;
    }

    std::vector<std::size_t> cluster;
    std::vector<std::size_t> kept;
    for (std::size_t j : remaining) {
      if (bev_iou(boxes[seed], boxes[j]) > options.overlap_threshold) {
        cluster.push_back(j);
      } else {
        kept.push_back(j);
      }
    }
    // The seed always overlaps itself unless the threshold is exactly 1.
    if (std::find(cluster.begin(), cluster.end(), seed) == cluster.end()) {
      cluster.push_back(seed);
      kept.erase(std::find(kept.begin(), kept.end(), seed));
    }
    remaining = std::move(kept);

    std::vector<Box3D> members;
    members.reserve(cluster.size());
    std::size_t seed_pos = 0;
    for (std::size_t k = 0; k < cluster.size(); ++k) {
      if (cluster[k] == seed) seed_pos = k;
      members.push_back(boxes[cluster[k]]);
    }

    const Box3D m = merge ? median_box(members, options.median_yaw, seed_pos) : boxes[seed];
    double z = scores[seed];
    if (rescore) {
      const double o = occlusion_factor(m, points);
      double sum = 0;
      for (std::size_t k : cluster) sum += bev_iou(m, boxes[k]) * scores[k];
      z = (o + 1) * sum;
    }

    std::rotate(cluster.begin(), cluster.begin() + static_cast<std::ptrdiff_t>(seed_pos),
                cluster.begin() + static_cast<std::ptrdiff_t>(seed_pos) + 1);
    out.boxes.push_back(m);
    out.scores.push_back(z);
    out.clusters.push_back(std::move(cluster));
  }
  return out;
}

NmsMode parse_nms_mode(bool merge, bool score) {
  if (merge && score) return NmsMode::kMergeScore;
  if (merge) return NmsMode::kMergeOnly;
  if (score) return NmsMode::kScoreOnly;
  return NmsMode::kStandard;
}

}  // namespace pgnn

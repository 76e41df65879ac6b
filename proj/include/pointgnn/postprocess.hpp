#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pointgnn/boxes.hpp"

namespace pgnn {

enum class NmsMode {
  kMergeScore,  // median box, occlusion-weighted IoU score
  kMergeOnly,   // median box, best member score
  kScoreOnly,   // seed box, occlusion-weighted IoU score
  kStandard,    // seed box, seed score
};

enum class MedianYaw {
  kNormalizedMedian,  // median of yaws normalized into [-pi/4, 3pi/4)
  kSeed,              // keep the yaw of the highest-scoring member
};

struct NmsOptions {
  double overlap_threshold = 0.01;
  NmsMode mode = NmsMode::kMergeScore;
  MedianYaw median_yaw = MedianYaw::kNormalizedMedian;
};

struct NmsResult {
  std::vector<Box3D> boxes;
  std::vector<double> scores;
  // Input indices per cluster; the seed comes first.
  std::vector<std::vector<std::size_t>> clusters;
};

// Component-wise median of center and size; even counts average the two
// middle values. `seed` is used only by MedianYaw::kSeed.
Box3D median_box(std::span<const Box3D> cluster, MedianYaw yaw_mode = MedianYaw::kNormalizedMedian,
                 std::size_t seed = 0);

// Non-maximum suppression with box merging and scoring. Overlap is BEV IoU;
// the occlusion factor of each merged box is measured against `points`.
NmsResult merge_score_nms(std::span<const Box3D> boxes, std::span<const double> scores,
                          const PointCloud& points, const NmsOptions& options);

NmsMode parse_nms_mode(bool merge, bool score);

}  // namespace pgnn

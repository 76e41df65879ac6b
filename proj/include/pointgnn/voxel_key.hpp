#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>

#include <Eigen/Core>

namespace pgnn {

using VoxelKey = std::array<std::int64_t, 3>;

inline VoxelKey voxel_key(const Eigen::Vector3d& p, const Eigen::Vector3d& origin, double size) {
  return {static_cast<std::int64_t>(std::floor((p.x() - origin.x()) / size)),
          static_cast<std::int64_t>(std::floor((p.y() - origin.y()) / size)),
          static_cast<std::int64_t>(std::floor((p.z() - origin.z()) / size))};
}

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    std::uint64_t h = 1469598103934665603ull;
    for (auto v : k) {
      h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

}  // namespace pgnn

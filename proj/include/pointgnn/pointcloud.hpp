#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace pgnn {

using Vec3 = Eigen::Vector3d;

// Sensor frame: x forward, y left, z up.
struct Point {
  Vec3 position = Vec3::Zero();
  double intensity = 0.0;
};

struct PointCloud {
  std::vector<Point> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  const Point& operator[](std::size_t i) const { return points[i]; }
  Point& operator[](std::size_t i) { return points[i]; }

  // N x 3 matrix of positions.
  Eigen::MatrixX3d positions() const;
};

struct VoxelDownsampleResult {
  PointCloud cloud;
  std::vector<std::size_t> kept_indices;
};

enum class VoxelMode { kRandom, kCentroidNearest };

// KITTI velodyne records: 4 x little-endian float32 (x, y, z, intensity).
PointCloud parse_kitti_bin(std::span<const std::uint8_t> bytes);
PointCloud read_kitti_bin(const std::string& path);

// Plain-text interchange: one `x y z intensity` line per point.
PointCloud parse_point_text(std::istream& in);
PointCloud read_point_text(const std::string& path);
void write_point_text(std::ostream& out, const PointCloud& cloud);

// Angular frustum around the +x axis.
PointCloud frustum_crop(const PointCloud& cloud, double half_angle_h,
                        double half_angle_v, double min_range = 0.0);

VoxelDownsampleResult voxel_downsample(const PointCloud& cloud, double voxel_size,
                                       VoxelMode mode, std::uint64_t seed);

// Emulates a LiDAR with fewer scan lines: clusters elevation angles into
// `source_lines` groups with 1-D k-means and keeps every
// (source_lines / target_lines)-th group, counting from the lowest angle.
PointCloud scanline_downsample(const PointCloud& cloud, int source_lines, int target_lines,
                               int kmeans_iters, std::uint64_t seed);

// Elevation angle atan2(z, hypot(x, y)).
double elevation_angle(const Vec3& p);

}  // namespace pgnn

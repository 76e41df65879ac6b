#include "pointgnn/pointcloud.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <unordered_map>

#include "pointgnn/errors.hpp"
#include "pointgnn/voxel_key.hpp"

namespace pgnn {

Eigen::MatrixX3d PointCloud::positions() const {
  Eigen::MatrixX3d out(static_cast<Eigen::Index>(points.size()), 3);
  for (std::size_t i = 0; i < points.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = points[i].position.transpose();
  }
  return out;
}

namespace {

float load_le_float(const std::uint8_t* p) {
  std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                       (static_cast<std::uint32_t>(p[2]) << 16) |
                       (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

}  // namespace

PointCloud parse_kitti_bin(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kRecord = 16;
  if (bytes.size() % kRecord != 0) {
    throw FormatError("kitti bin: length " + std::to_string(bytes.size()) +
                      " is not a multiple of 16; trailing record starts at byte offset " +
                      std::to_string(bytes.size() - bytes.size() % kRecord));
  }
  PointCloud cloud;
  cloud.points.reserve(bytes.size() / kRecord);
  for (std::size_t off = 0, rec = 0; off < bytes.size(); off += kRecord, ++rec) {
    std::array<float, 4> v;
    for (int k = 0; k < 4; ++k) v[k] = load_le_float(bytes.data() + off + 4 * k);
    for (float f : v) {
      if (!std::isfinite(f)) {
        throw FormatError("kitti bin: non-finite value in record " + std::to_string(rec));
      }
    }
    cloud.points.push_back(Point{Vec3(v[0], v[1], v[2]), static_cast<double>(v[3])});
  }
  return cloud;
}

PointCloud read_kitti_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_kitti_bin(bytes);
}

PointCloud parse_point_text(std::istream& in) {
  PointCloud cloud;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    std::istringstream ss(line);
    Point p;
    if (!(ss >> p.position.x() >> p.position.y() >> p.position.z() >> p.intensity)) {
      throw FormatError("point text: malformed line " + std::to_string(lineno));
    }
    if (!p.position.allFinite() || !std::isfinite(p.intensity)) {
      throw FormatError("point text: non-finite value on line " + std::to_string(lineno));
    }
    cloud.points.push_back(p);
  }
  return cloud;
}

PointCloud read_point_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  return parse_point_text(in);
}

void write_point_text(std::ostream& out, const PointCloud& cloud) {
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  for (const auto& p : cloud.points) {
    out << p.position.x() << ' ' << p.position.y() << ' ' << p.position.z() << ' ' << p.intensity
        << '\n';
  }
  out.precision(old_precision);
}

PointCloud frustum_crop(const PointCloud& cloud, double half_angle_h, double half_angle_v,
                        double min_range) {
  if (!(half_angle_h > 0 && half_angle_h <= std::numbers::pi)) {
    throw ArgumentError("frustum_crop: half_angle_h must be in (0, pi]");
  }
  if (!(half_angle_v > 0 && half_angle_v <= std::numbers::pi / 2)) {
    throw ArgumentError("frustum_crop: half_angle_v must be in (0, pi/2]");
  }
  if (!(min_range >= 0)) throw ArgumentError("frustum_crop: min_range must be >= 0");

  PointCloud out;
  for (const auto& p : cloud.points) {
    const Vec3& x = p.position;
    if (!(x.x() > min_range)) continue;
    if (std::abs(std::atan2(x.y(), x.x())) > half_angle_h) continue;
    if (std::abs(elevation_angle(x)) > half_angle_v) continue;
    out.points.push_back(p);
  }
  return out;
}

VoxelDownsampleResult voxel_downsample(const PointCloud& cloud, double voxel_size,
                                       VoxelMode mode, std::uint64_t seed) {
  if (!(voxel_size > 0)) throw ArgumentError("voxel_downsample: voxel_size must be > 0");

  // Voxels in order of first appearance so the random draw sequence is stable.
  std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash> slot_of;
  std::vector<std::vector<std::size_t>> members;
  std::vector<VoxelKey> keys;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const VoxelKey key = voxel_key(cloud[i].position, Vec3::Zero(), voxel_size);
    auto [it, inserted] = slot_of.try_emplace(key, members.size());
    if (inserted) {
      members.emplace_back();
      keys.push_back(key);
    }
    members[it->second].push_back(i);
  }

  std::vector<std::size_t> kept;
  kept.reserve(members.size());
  std::mt19937_64 rng(seed);
  for (std::size_t v = 0; v < members.size(); ++v) {
    const auto& m = members[v];
    if (mode == VoxelMode::kRandom) {
      std::uniform_int_distribution<std::size_t> pick(0, m.size() - 1);
      kept.push_back(m[pick(rng)]);
    } else {
      const Vec3 center =
          (Vec3(keys[v][0], keys[v][1], keys[v][2]).array() + 0.5).matrix() * voxel_size;
      std::size_t best = m.front();
      double best_d = (cloud[best].position - center).squaredNorm();
      for (std::size_t idx : m) {
        const double d = (cloud[idx].position - center).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = idx;
        }
      }
      kept.push_back(best);
    }
  }
  std::sort(kept.begin(), kept.end());

  VoxelDownsampleResult result;
  result.kept_indices = std::move(kept);
  result.cloud.points.reserve(result.kept_indices.size());
  for (std::size_t idx : result.kept_indices) result.cloud.points.push_back(cloud[idx]);
  return result;
}

double elevation_angle(const Vec3& p) {
  return std::atan2(p.z(), std::hypot(p.x(), p.y()));
}

namespace {

// 1-D k-means. Returns the cluster label of every value, with labels ordered
// by ascending cluster center.
std::vector<int> kmeans_1d(const std::vector<double>& values, int k, int iters,
                           std::uint64_t seed) {
  const std::size_t n = values.size();
  std::mt19937_64 rng(seed);
  std::vector<double> centers;
  centers.reserve(k);

  // k-means++ seeding.
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  centers.push_back(values[first(rng)]);
  std::vector<double> d2(n);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (double c : centers) best = std::min(best, (values[i] - c) * (values[i] - c));
      d2[i] = best;
      total += best;
    }
    if (total <= 0) {
      centers.push_back(values[first(rng)]);
      continue;
    }
    std::uniform_real_distribution<double> u(0.0, total);
    double target = u(rng);
    std::size_t pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      target -= d2[i];
      if (target < 0) {
        pick = i;
        break;
      }
    }
    centers.push_back(values[pick]);
  }

  std::vector<int> label(n, 0);
  auto assign = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::abs(values[i] - centers[0]);
      for (int c = 1; c < k; ++c) {
        const double d = std::abs(values[i] - centers[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      label[i] = best;
    }
  };

  for (int it = 0; it < iters; ++it) {
    assign();
    std::vector<double> sum(k, 0.0);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sum[label[i]] += values[i];
      ++count[label[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (count[c] > 0) {
        centers[c] = sum[c] / static_cast<double>(count[c]);
        continue;
      }
      // Empty cluster: move it onto the point farthest from its own center.
      std::size_t far = 0;
      double far_d = -1;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = std::abs(values[i] - centers[label[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      centers[c] = values[far];
      label[far] = c;
    }
  }
  assign();

  std::vector<int> order(k);
  for (int c = 0; c < k; ++c) order[c] = c;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return centers[a] < centers[b]; });
  std::vector<int> rank(k);
  for (int r = 0; r < k; ++r) rank[order[r]] = r;
  for (auto& l : label) l = rank[l];
  return label;
}

}  // namespace

PointCloud scanline_downsample(const PointCloud& cloud, int source_lines, int target_lines,
                               int kmeans_iters, std::uint64_t seed) {
  if (source_lines <= 0 || target_lines <= 0 || source_lines % target_lines != 0) {
    throw ArgumentError("scanline_downsample: target_lines must divide source_lines");
  }
  if (cloud.size() < static_cast<std::size_t>(source_lines)) {
    throw ArgumentError("scanline_downsample: cloud has fewer points than source_lines");
  }
  if (kmeans_iters < 0) throw ArgumentError("scanline_downsample: kmeans_iters must be >= 0");
  if (target_lines == source_lines) return cloud;

  std::vector<double> elev(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) elev[i] = elevation_angle(cloud[i].position);
  const std::vector<int> line = kmeans_1d(elev, source_lines, kmeans_iters, seed);

  const int stride = source_lines / target_lines;
  PointCloud out;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (line[i] % stride == 0) out.points.push_back(cloud[i]);
  }
  return out;
}

}  // namespace pgnn

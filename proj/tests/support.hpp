#pragma once

#include <random>

#include "pointgnn/pointcloud.hpp"

namespace pgnn::test {

inline Point make_point(double x, double y, double z, double intensity = 0.0) {
  Point p;
  p.position = Vec3(x, y, z);
  p.intensity = intensity;
  return p;
}

// Uniform points in [lo, hi)^3 with uniform intensities.
inline PointCloud random_cloud(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi), i(0.0, 1.0);
  PointCloud c;
  c.points.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double x = u(rng), y = u(rng), z = u(rng);
    c.points.push_back(make_point(x, y, z, i(rng)));
  }
  return c;
}

}  // namespace pgnn::test

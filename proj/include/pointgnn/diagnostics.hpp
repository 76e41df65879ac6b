#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pointgnn/config.hpp"
#include "pointgnn/graph.hpp"

namespace pgnn {

// O(N^2) edge set with the same ordering and conventions as build_graph.
std::vector<Edge> brute_force_edges(const PointCloud& cloud, double radius,
                                    bool include_self = false);

struct GradientCheckReport {
  double max_rel_error = 0.0;
  int probes = 0;
  int redrawn = 0;
  std::size_t vertices = 0;
  std::size_t edges = 0;
};

// Finite-difference check of loss_and_gradient on a small synthetic scene of
// `vertex_count` vertices. All parameters, including the registration MLP's
// last layer, are randomized so that every path carries gradient.
GradientCheckReport check_model_gradient(const Preset& preset, std::size_t vertex_count,
                                         int probes, std::uint64_t seed);

}  // namespace pgnn

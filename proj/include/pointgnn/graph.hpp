#pragma once

#include <cstdint>
#include <iosfwd>
#include <unordered_map>
#include <vector>

#include "pointgnn/pointcloud.hpp"
#include "pointgnn/voxel_key.hpp"

namespace pgnn {

// Uniform spatial hash with cubic cells. A point's cell is
// floor((position - origin) / cell_size) per axis.
struct CellGrid {
  double cell_size = 0.0;
  Vec3 origin = Vec3::Zero();
  std::unordered_map<VoxelKey, std::vector<std::size_t>, VoxelKeyHash> cells;

  VoxelKey key_of(const Vec3& p) const { return voxel_key(p, origin, cell_size); }
};

// Message flows from `src` (j) into `dst` (i).
struct Edge {
  std::int32_t src = 0;
  std::int32_t dst = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

struct Graph {
  PointCloud vertices;
  std::vector<Edge> edges;  // sorted by (dst, src)
  double radius = 0.0;
};

CellGrid build_cell_list(const PointCloud& cloud, double cell_size);

// All indices j with |x_j - x_query| < r, ascending. Includes the query itself.
std::vector<std::size_t> radius_neighbors(const CellGrid& grid, const PointCloud& cloud,
                                          std::size_t query_index, double r);

// Same search around an arbitrary position; the position need not be in `cloud`.
std::vector<std::size_t> radius_neighbors_at(const CellGrid& grid, const PointCloud& cloud,
                                             const Vec3& query, double r);

Graph build_graph(const PointCloud& cloud, double r, bool include_self = false);

// Keeps at most `max_in_per_vertex` incoming edges per destination, drawn
// uniformly without replacement.
Graph cap_edges(const Graph& graph, std::size_t max_in_per_vertex, std::uint64_t seed);

// In-degree of every vertex.
std::vector<std::size_t> in_degrees(const Graph& graph);

// Debug dump: header `N E r`, then one `i j` line per edge (destination, source).
void write_graph_dump(std::ostream& out, const Graph& graph);

}  // namespace pgnn

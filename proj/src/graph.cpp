#include "pointgnn/graph.hpp"

#include <algorithm>
#include <limits>
#include <ostream>
#include <random>

#include "pointgnn/errors.hpp"

namespace pgnn {

CellGrid build_cell_list(const PointCloud& cloud, double cell_size) {
  if (!(cell_size > 0)) throw ArgumentError("build_cell_list: cell_size must be > 0");
  CellGrid grid;
  grid.cell_size = cell_size;
  if (cloud.empty()) return grid;

  grid.origin = cloud[0].position;
  for (const auto& p : cloud.points) grid.origin = grid.origin.cwiseMin(p.position);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    grid.cells[grid.key_of(cloud[i].position)].push_back(i);
  }
  return grid;
}

std::vector<std::size_t> radius_neighbors_at(const CellGrid& grid, const PointCloud& cloud,
                                             const Vec3& query, double r) {
  if (r > grid.cell_size) {
    throw ArgumentError("radius_neighbors: radius exceeds cell size");
  }
  std::vector<std::size_t> out;
  const double r2 = r * r;
  const VoxelKey center = grid.key_of(query);
  for (std::int64_t dx = -1; dx <= 1; ++dx) {
    for (std::int64_t dy = -1; dy <= 1; ++dy) {
      for (std::int64_t dz = -1; dz <= 1; ++dz) {
        auto it = grid.cells.find({center[0] + dx, center[1] + dy, center[2] + dz});
        if (it == grid.cells.end()) continue;
        for (std::size_t j : it->second) {
          if ((cloud[j].position - query).squaredNorm() < r2) out.push_back(j);
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> radius_neighbors(const CellGrid& grid, const PointCloud& cloud,
                                          std::size_t query_index, double r) {
  if (query_index >= cloud.size()) throw ArgumentError("radius_neighbors: query out of range");
  return radius_neighbors_at(grid, cloud, cloud[query_index].position, r);
}

Graph build_graph(const PointCloud& cloud, double r, bool include_self) {
  if (!(r > 0)) throw ArgumentError("build_graph: r must be > 0");
  if (cloud.size() > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max())) {
    throw ArgumentError("build_graph: too many vertices");
  }
  Graph g;
  g.vertices = cloud;
  g.radius = r;
  const CellGrid grid = build_cell_list(cloud, r);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (std::size_t j : radius_neighbors(grid, cloud, i, r)) {
      if (j == i && !include_self) continue;
      g.edges.push_back({static_cast<std::int32_t>(j), static_cast<std::int32_t>(i)});
    }
  }
  return g;
}

Graph cap_edges(const Graph& graph, std::size_t max_in_per_vertex, std::uint64_t seed) {
  if (max_in_per_vertex < 1) throw ArgumentError("cap_edges: max_in_per_vertex must be >= 1");
  Graph out;
  out.vertices = graph.vertices;
  out.radius = graph.radius;
  out.edges.reserve(graph.edges.size());

  std::vector<Edge> sorted = graph.edges;
  std::stable_sort(sorted.begin(), sorted.end(), [](const Edge& a, const Edge& b) {
    return a.dst != b.dst ? a.dst < b.dst : a.src < b.src;
  });

  std::mt19937_64 rng(seed);
  for (std::size_t begin = 0; begin < sorted.size();) {
    std::size_t end = begin;
    while (end < sorted.size() && sorted[end].dst == sorted[begin].dst) ++end;
    const std::size_t count = end - begin;
    if (count <= max_in_per_vertex) {
      out.edges.insert(out.edges.end(), sorted.begin() + begin, sorted.begin() + end);
    } else {
      // std::sample keeps the relative order of the selected elements.
      std::sample(sorted.begin() + begin, sorted.begin() + end, std::back_inserter(out.edges),
                  max_in_per_vertex, rng);
    }
    begin = end;
  }
  return out;
}

std::vector<std::size_t> in_degrees(const Graph& graph) {
  std::vector<std::size_t> deg(graph.vertices.size(), 0);
  for (const auto& e : graph.edges) ++deg[e.dst];
  return deg;
}

void write_graph_dump(std::ostream& out, const Graph& graph) {
  out << graph.vertices.size() << ' ' << graph.edges.size() << ' ' << graph.radius << '\n';
  for (const auto& e : graph.edges) out << e.dst << ' ' << e.src << '\n';
}

}  // namespace pgnn

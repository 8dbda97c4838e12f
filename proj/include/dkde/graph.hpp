#pragma once

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <tuple>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "dkde/points.hpp"

namespace dkde {

inline std::uint64_t edge_key(PointId a, PointId b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}
inline PointId edge_lo(std::uint64_t k) { return static_cast<PointId>(k >> 32); }
inline PointId edge_hi(std::uint64_t k) { return static_cast<PointId>(k & 0xffffffffu); }

struct WeightedEdge {
  PointId a, b;  // a <= b
  double w;
  bool operator==(const WeightedEdge&) const = default;
};

// Undirected weighted graph on caller ids. Self-loops are allowed (a == b).
struct WeightedGraph {
  std::vector<PointId> vertices;
  absl::flat_hash_map<std::uint64_t, double> edges;

  void add(PointId a, PointId b, double w) { edges[edge_key(a, b)] += w; }
  double weight(PointId a, PointId b) const {
    auto it = edges.find(edge_key(a, b));
    return it == edges.end() ? 0.0 : it->second;
  }
  std::size_t edge_count() const { return edges.size(); }
  double total_weight() const {
    double s = 0.0;
    for (const auto& e : sorted_edges()) s += e.w;
    return s;
  }
  std::vector<WeightedEdge> sorted_edges() const {
    std::vector<WeightedEdge> out;
    out.reserve(edges.size());
    for (const auto& [k, w] : edges) out.push_back({edge_lo(k), edge_hi(k), w});
    std::sort(out.begin(), out.end(),
              [](const WeightedEdge& x, const WeightedEdge& y) { return std::tie(x.a, x.b) < std::tie(y.a, y.b); });
    return out;
  }
};

}  // namespace dkde

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace dkde {

using PointId = std::uint32_t;

// Row-major point block with caller-chosen ids.
struct PointSet {
  int dim = 0;
  std::vector<double> coords;
  std::vector<PointId> ids;

  PointSet() = default;
  explicit PointSet(int d) : dim(d) {}

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
  std::span<const double> point(std::size_t r) const {
    return {coords.data() + r * dim, static_cast<std::size_t>(dim)};
  }
  void push(PointId id, std::span<const double> p) {
    if (static_cast<int>(p.size()) != dim) throw std::invalid_argument("dimension mismatch");
    ids.push_back(id);
    coords.insert(coords.end(), p.begin(), p.end());
  }
  PointSet subset(const std::vector<std::size_t>& rows) const {
    PointSet s(dim);
    for (auto r : rows) s.push(ids[r], point(r));
    return s;
  }
};

}  // namespace dkde

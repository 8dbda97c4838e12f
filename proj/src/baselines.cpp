#include "dkde/baselines.hpp"

#include <algorithm>
#include <stdexcept>

#include "dkde/rng.hpp"

namespace dkde {

double exact_kde_one(const PointSet& X, std::span<const double> q, const KernelConfig& cfg) {
  if (!X.empty() && static_cast<int>(q.size()) != X.dim) throw std::invalid_argument("dimension mismatch");
  double s = 0.0;
  for (std::size_t r = 0; r < X.size(); ++r) s += kernel_from_sq(cfg, squared_distance(q, X.point(r)));
  return s;
}

std::vector<double> exact_kde(const PointSet& X, const PointSet& Q, const KernelConfig& cfg) {
  std::vector<double> out(Q.size());
  for (std::size_t r = 0; r < Q.size(); ++r) out[r] = exact_kde_one(X, Q.point(r), cfg);
  return out;
}

void ExactKde::add_data_point(PointId id, std::span<const double> z) {
  X_.push(id, z);
  for (std::size_t r = 0; r < Q_.size(); ++r) mu_[r] += kernel_from_sq(cfg_, squared_distance(z, Q_.point(r)));
}

void ExactKde::add_query_point(PointId id, std::span<const double> q) {
  if (slot_.contains(id)) throw std::invalid_argument("duplicate query id");
  slot_[id] = Q_.size();
  Q_.push(id, q);
  mu_.push_back(exact_kde_one(X_, q, cfg_));
}

RandomSamplingKde::RandomSamplingKde(const KernelConfig& cfg, int dim, double rate,
                                     std::uint64_t seed)
    : cfg_(cfg), rate_(rate), key_(derive_key(seed, SeedLabel{Purpose::user, 0, 0, 0, 0x5a, 0})),
      S_(dim), Q_(dim) {
  if (!(rate > 0.0 && rate <= 1.0)) throw std::invalid_argument("sampling rate must lie in (0,1]");
}

void RandomSamplingKde::add_data_point(PointId id, std::span<const double> z) {
  if (!coin(key_, id, rate_)) return;
  S_.push(id, z);
  for (std::size_t r = 0; r < Q_.size(); ++r) sum_[r] += kernel_from_sq(cfg_, squared_distance(z, Q_.point(r)));
}

void RandomSamplingKde::add_query_point(PointId id, std::span<const double> q) {
  if (slot_.contains(id)) throw std::invalid_argument("duplicate query id");
  slot_[id] = Q_.size();
  Q_.push(id, q);
  sum_.push_back(exact_kde_one(S_, q, cfg_));
}

std::vector<double> static_kde_estimates(const PointSet& X, const PointSet& Q,
                                         const KernelConfig& cfg, const KdeParams& params,
                                         std::uint64_t seed) {
  DynamicKde kde(cfg, params, seed, X.dim);
  kde.initialise(X, Q);
  std::vector<double> out(Q.size());
  for (std::size_t r = 0; r < Q.size(); ++r) out[r] = kde.estimate(Q.ids[r]);
  return out;
}

WeightedGraph knn_graph(const PointSet& X, int k, const KernelConfig& cfg) {
  const std::size_t n = X.size();
  if (k < 1 || static_cast<std::size_t>(k) >= n) throw std::invalid_argument("knn_graph: need 1 <= k < n");
  WeightedGraph g;
  g.vertices = X.ids;
  std::sort(g.vertices.begin(), g.vertices.end());
  std::vector<std::pair<double, PointId>> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t m = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      d[m] = {squared_distance(X.point(i), X.point(j)), X.ids[j]};
      ++m;
    }
    std::vector<std::size_t> idx(m);
    for (std::size_t t = 0; t < m; ++t) idx[t] = t;
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(),
                      [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
    for (int t = 0; t < k; ++t) {
      auto key = edge_key(X.ids[i], d[idx[t]].second);
      if (!g.edges.contains(key)) g.edges[key] = kernel_from_sq(cfg, d[idx[t]].first);
    }
  }
  return g;
}

WeightedGraph fully_connected_graph(const PointSet& X, const KernelConfig& cfg, std::size_t cap) {
  if (X.size() > cap) throw std::invalid_argument("fully_connected_graph: n exceeds the dense cap");
  WeightedGraph g;
  g.vertices = X.ids;
  std::sort(g.vertices.begin(), g.vertices.end());
  g.edges.reserve(X.size() * (X.size() - 1) / 2);
  for (std::size_t i = 0; i < X.size(); ++i)
    for (std::size_t j = i + 1; j < X.size(); ++j)
      g.edges[edge_key(X.ids[i], X.ids[j])] = kernel_from_sq(cfg, squared_distance(X.point(i), X.point(j)));
  return g;
}

}  // namespace dkde

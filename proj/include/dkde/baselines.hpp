#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "dkde/dynamic_kde.hpp"
#include "dkde/graph.hpp"
#include "dkde/kernel_levels.hpp"
#include "dkde/points.hpp"

namespace dkde {

// mu_q = sum_x k(q, x) by direct summation, for every row of Q.
std::vector<double> exact_kde(const PointSet& X, const PointSet& Q, const KernelConfig& cfg);
double exact_kde_one(const PointSet& X, std::span<const double> q, const KernelConfig& cfg);

// Exact densities maintained incrementally: each insertion adds k(q, z) to
// every query.
class ExactKde {
 public:
  ExactKde(const KernelConfig& cfg, int dim) : cfg_(cfg), X_(dim), Q_(dim) {}
  void add_data_point(PointId id, std::span<const double> z);
  void add_query_point(PointId id, std::span<const double> q);
  double estimate(PointId q) const { return mu_.at(slot_.at(q)); }
  std::size_t n() const { return X_.size(); }

 private:
  KernelConfig cfg_;
  PointSet X_, Q_;
  std::vector<double> mu_;
  absl::flat_hash_map<PointId, std::size_t> slot_;
};

// Uniform random sampling at a fixed rate; the estimate is the sampled sum
// scaled by 1/rate. Sampling coins are keyed by point id.
class RandomSamplingKde {
 public:
  RandomSamplingKde(const KernelConfig& cfg, int dim, double rate, std::uint64_t seed);
  void add_data_point(PointId id, std::span<const double> z);
  void add_query_point(PointId id, std::span<const double> q);
  double estimate(PointId q) const { return sum_.at(slot_.at(q)) / rate_; }
  std::size_t sample_size() const { return S_.size(); }
  double rate() const { return rate_; }

 private:
  KernelConfig cfg_;
  double rate_;
  std::uint64_t key_;
  PointSet S_, Q_;
  std::vector<double> sum_;
  absl::flat_hash_map<PointId, std::size_t> slot_;
};

// The static baseline: a fresh structure on (X, Q), every query estimated
// from scratch.
std::vector<double> static_kde_estimates(const PointSet& X, const PointSet& Q,
                                         const KernelConfig& cfg, const KdeParams& params,
                                         std::uint64_t seed);

// Brute-force k nearest neighbours (Euclidean, ties by smaller id), union of
// the directed edges, weight = kernel value.
WeightedGraph knn_graph(const PointSet& X, int k, const KernelConfig& cfg);

constexpr std::size_t kDenseCap = 4096;
WeightedGraph fully_connected_graph(const PointSet& X, const KernelConfig& cfg,
                                    std::size_t cap = kDenseCap);

}  // namespace dkde

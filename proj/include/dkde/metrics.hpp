#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dkde/graph.hpp"

namespace dkde {

struct RelativeError {
  double value = 0.0;        // mean of |est - exact| / exact over kept queries
  std::size_t used = 0;
  std::size_t excluded = 0;  // exact value 0
};

RelativeError relative_error(std::span<const double> estimates, std::span<const double> exact);

// Fraction of queries with est in [(1-eps) mu, (1+eps) mu]; zero-exact
// queries are skipped.
double fraction_within(std::span<const double> estimates, std::span<const double> exact, double eps);

// Mutual information over the arithmetic mean of the two entropies. Two
// constant labelings score 1.
double nmi(std::span<const int> a, std::span<const int> b);
double ari(std::span<const int> a, std::span<const int> b);

// Weighted degree, self-loops counted once.
absl::flat_hash_map<PointId, double> degrees(const WeightedGraph& g);

// w(S, V\S) / min(vol S, vol V\S). 1 when S or its complement is empty, and
// when the smaller volume is 0.
double conductance(const WeightedGraph& g, std::span<const PointId> S);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Two-sample Kolmogorov-Smirnov test with the asymptotic distribution.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

// Q_KS(lambda) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2).
double kolmogorov_q(double lambda);

}  // namespace dkde

#include "dkde/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <absl/container/flat_hash_set.h>

namespace dkde {

RelativeError relative_error(std::span<const double> estimates, std::span<const double> exact) {
  if (estimates.size() != exact.size()) throw std::invalid_argument("relative_error: length mismatch");
  RelativeError r;
  double s = 0.0;
  for (std::size_t i = 0; i < exact.size(); ++i) {
    if (exact[i] == 0.0) {
      ++r.excluded;
      continue;
    }
    s += std::abs((estimates[i] - exact[i]) / exact[i]);
    ++r.used;
  }
  r.value = r.used ? s / static_cast<double>(r.used) : 0.0;
  return r;
}

double fraction_within(std::span<const double> estimates, std::span<const double> exact, double eps) {
  if (estimates.size() != exact.size()) throw std::invalid_argument("fraction_within: length mismatch");
  std::size_t in = 0, used = 0;
  for (std::size_t i = 0; i < exact.size(); ++i) {
    if (exact[i] == 0.0) continue;
    ++used;
    if (estimates[i] >= (1 - eps) * exact[i] && estimates[i] <= (1 + eps) * exact[i]) ++in;
  }
  return used ? static_cast<double>(in) / static_cast<double>(used) : 1.0;
}

namespace {

struct Contingency {
  std::vector<std::vector<double>> n;  // rows: a classes, cols: b classes
  std::vector<double> ra, cb;
  double total = 0.0;
};

Contingency contingency(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw std::invalid_argument("label length mismatch");
  if (a.empty()) throw std::invalid_argument("empty labelings");
  absl::flat_hash_map<int, std::size_t> ia, ib;
  for (int v : a) ia.try_emplace(v, ia.size());
  for (int v : b) ib.try_emplace(v, ib.size());
  Contingency c;
  c.n.assign(ia.size(), std::vector<double>(ib.size(), 0.0));
  c.ra.assign(ia.size(), 0.0);
  c.cb.assign(ib.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto r = ia[a[i]], k = ib[b[i]];
    c.n[r][k] += 1;
    c.ra[r] += 1;
    c.cb[k] += 1;
  }
  c.total = static_cast<double>(a.size());
  return c;
}

double entropy(const std::vector<double>& counts, double total) {
  double h = 0.0;
  for (double v : counts)
    if (v > 0) h -= v / total * std::log(v / total);
  return h;
}

double choose2(double v) { return v * (v - 1) / 2; }

}  // namespace

double nmi(std::span<const int> a, std::span<const int> b) {
  auto c = contingency(a, b);
  double ha = entropy(c.ra, c.total), hb = entropy(c.cb, c.total);
  if (c.ra.size() == 1 && c.cb.size() == 1) return 1.0;
  if (ha == 0.0 || hb == 0.0) return 0.0;
  double mi = 0.0;
  for (std::size_t r = 0; r < c.ra.size(); ++r)
    for (std::size_t k = 0; k < c.cb.size(); ++k) {
      double v = c.n[r][k];
      if (v > 0) mi += v / c.total * std::log(v * c.total / (c.ra[r] * c.cb[k]));
    }
  return std::clamp(mi / (0.5 * (ha + hb)), 0.0, 1.0);
}

double ari(std::span<const int> a, std::span<const int> b) {
  auto c = contingency(a, b);
  double sum_ij = 0.0, sa = 0.0, sb = 0.0;
  for (const auto& row : c.n)
    for (double v : row) sum_ij += choose2(v);
  for (double v : c.ra) sa += choose2(v);
  for (double v : c.cb) sb += choose2(v);
  double expected = sa * sb / choose2(c.total);
  double maxi = 0.5 * (sa + sb);
  // Both labelings trivial in the same way (all one class, or all singletons).
  if (maxi == expected) return 1.0;
  return (sum_ij - expected) / (maxi - expected);
}

absl::flat_hash_map<PointId, double> degrees(const WeightedGraph& g) {
  absl::flat_hash_map<PointId, double> d;
  for (PointId v : g.vertices) d[v] = 0.0;
  for (const auto& e : g.sorted_edges()) {
    d[e.a] += e.w;
    if (e.b != e.a) d[e.b] += e.w;
  }
  return d;
}

double conductance(const WeightedGraph& g, std::span<const PointId> S) {
  absl::flat_hash_set<PointId> in(S.begin(), S.end());
  absl::flat_hash_set<PointId> all(g.vertices.begin(), g.vertices.end());
  for (PointId v : in)
    if (!all.contains(v)) throw std::invalid_argument("conductance: vertex not in graph");
  if (in.empty() || in.size() == all.size()) return 1.0;
  auto d = degrees(g);
  double volS = 0.0, volT = 0.0, cut = 0.0;
  for (PointId v : g.vertices) (in.contains(v) ? volS : volT) += d[v];
  for (const auto& e : g.sorted_edges())
    if (in.contains(e.a) != in.contains(e.b)) cut += e.w;
  double m = std::min(volS, volT);
  return m > 0.0 ? cut / m : 1.0;
}

double kolmogorov_q(double lambda) {
  if (lambda < 1e-3) return 1.0;
  double s = 0.0, sign = 1.0;
  for (int j = 1; j <= 200; ++j) {
    double t = sign * std::exp(-2.0 * j * j * lambda * lambda);
    s += t;
    if (std::abs(t) < 1e-16 * std::abs(s)) break;
    sign = -sign;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  // Step through the pooled values, advancing past ties on both sides.
  while (i < a.size() && j < b.size()) {
    double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  double en = std::sqrt(na * nb / (na + nb));
  KsResult r;
  r.statistic = d;
  r.p_value = kolmogorov_q((en + 0.12 + 0.11 / en) * d);
  return r;
}

}  // namespace dkde

#include "dkde/kernel_levels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dkde {

namespace {

// Ceil with a little slack: the ratios below are exact integers in real
// arithmetic more often than not (r_{i-1}/r_j squared for the Gaussian).
int ceil_tol(double v) { return static_cast<int>(std::ceil(v - 1e-9)); }

WeightLevels make_levels(const KernelConfig& cfg, double mu, std::int64_t n) {
  WeightLevels wl;
  wl.mu = mu;
  wl.n = n;
  wl.J = level_count(mu, n);
  wl.radii.reserve(wl.J);
  for (int j = 1; j <= wl.J; ++j) wl.radii.push_back(level_radius(cfg, j));
  return wl;
}

}  // namespace

void KernelConfig::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw std::invalid_argument("kernel sigma must be positive");
  if (kind == KernelKind::t_student && degree < 1)
    throw std::invalid_argument("t-student degree must be a positive integer");
}

std::string KernelConfig::name() const {
  switch (kind) {
    case KernelKind::gaussian: return "gaussian";
    case KernelKind::exponential: return "exponential";
    case KernelKind::t_student: return "t-student";
  }
  return "?";
}

KernelKind parse_kernel_kind(const std::string& s) {
  if (s == "gaussian") return KernelKind::gaussian;
  if (s == "exponential") return KernelKind::exponential;
  if (s == "t-student" || s == "t_student") return KernelKind::t_student;
  throw std::invalid_argument("unknown kernel: " + s);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dimension mismatch");
  double s = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    double t = a[c] - b[c];
    s += t * t;
  }
  return s;
}

double kernel_from_sq(const KernelConfig& cfg, double d2) {
  switch (cfg.kind) {
    case KernelKind::gaussian:
      return std::exp(-cfg.sigma * d2);
    case KernelKind::exponential:
      return std::exp(-cfg.sigma * std::sqrt(d2));
    case KernelKind::t_student: {
      double r = std::sqrt(d2);
      double rd = cfg.degree == 2 ? d2 : std::pow(r, cfg.degree);
      return 1.0 / (1.0 + cfg.sigma * rd);
    }
  }
  return 0.0;
}

double eval_kernel(const KernelConfig& cfg, std::span<const double> a,
                   std::span<const double> b) {
  return kernel_from_sq(cfg, squared_distance(a, b));
}

int level_count(double mu, std::int64_t n) {
  // ceil(log2 x) read off the binary exponent, exact for every double x.
  double x = 2.0 * static_cast<double>(n) / mu;
  int e = 0;
  double m = std::frexp(x, &e);  // x = m * 2^e, m in [0.5, 1)
  int c = (m == 0.5) ? e - 1 : e;
  return std::max(c, 0);
}

int raw_level(double w) {
  if (w <= 0.0) return kBeyondAll;
  int e = 0;
  double m = std::frexp(w, &e);
  return (m == 0.5) ? 2 - e : 1 - e;
}

int weight_level_index(double w, double mu, std::int64_t n) {
  if (!(w > 0.0)) throw std::invalid_argument("weight must be positive");
  int J = level_count(mu, n);
  return std::min(raw_level(w), J + 1);
}

double level_radius(const KernelConfig& cfg, int j) {
  const double t = j * std::numbers::ln2;
  switch (cfg.kind) {
    case KernelKind::gaussian: return std::sqrt(t / cfg.sigma);
    case KernelKind::exponential: return t / cfg.sigma;
    case KernelKind::t_student:
      return std::pow((std::exp2(static_cast<double>(j)) - 1.0) / cfg.sigma,
                      1.0 / cfg.degree);
  }
  return 0.0;
}

WeightLevels distance_levels(const KernelConfig& cfg, double mu, std::int64_t n) {
  cfg.validate();
  if (n < 1) throw std::invalid_argument("n must be positive");
  if (!(mu >= 1.0) || mu > 2.0 * static_cast<double>(n))
    throw std::invalid_argument("mu outside [1, 2n]");
  return make_levels(cfg, mu, n);
}

double distortion_cap(std::int64_t n) {
  return std::pow(std::log2(static_cast<double>(std::max<std::int64_t>(n, 2))),
                  1.0 / 7.0);
}

int level_exponent(const WeightLevels& wl, int j) {
  if (j < 1 || j > wl.J) throw std::invalid_argument("level index out of range");
  const double rj = wl.radii[j - 1];
  if (!(rj > 0.0)) throw std::invalid_argument("degenerate radius");
  const double cap = distortion_cap(wl.n);
  int best = 0;
  for (int i = j + 1; i <= wl.J + 1; ++i) {
    double c = std::min(wl.radii[i - 2] / rj, cap);
    best = std::max(best, ceil_tol((i - j) / (c * c)));
  }
  return best;
}

int compute_kj(const KernelConfig& cfg, double mu, std::int64_t n, int j,
               double p_near) {
  if (!(p_near > 0.0 && p_near < 1.0))
    throw std::invalid_argument("p_near must lie in (0, 1)");
  WeightLevels wl = make_levels(cfg, mu, n);
  int e = level_exponent(wl, j);
  return std::max(1, ceil_tol(e / std::log2(1.0 / p_near)));
}

CostProfile cost_of_kernel(const KernelConfig& cfg, double mu, std::int64_t n,
                           double p_near) {
  cfg.validate();
  if (!(p_near > 0.0 && p_near < 1.0))
    throw std::invalid_argument("p_near must lie in (0, 1)");
  WeightLevels wl = distance_levels(cfg, mu, n);
  CostProfile cp;
  cp.cost = 1.0;
  for (int j = 1; j <= wl.J; ++j) {
    int e = level_exponent(wl, j);
    cp.kj.push_back(std::max(1, ceil_tol(e / std::log2(1.0 / p_near))));
    cp.per_level_cost.push_back(std::exp2(static_cast<double>(e)));
  }
  if (!cp.per_level_cost.empty())
    cp.cost = *std::max_element(cp.per_level_cost.begin(), cp.per_level_cost.end());
  return cp;
}

}  // namespace dkde

#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace dkde {

enum class KernelKind { gaussian, exponential, t_student };

struct KernelConfig {
  KernelKind kind = KernelKind::gaussian;
  double sigma = 1.0;
  int degree = 1;  // t_student only

  void validate() const;
  std::string name() const;
};

KernelKind parse_kernel_kind(const std::string& s);

double squared_distance(std::span<const double> a, std::span<const double> b);

// k as a function of the squared distance; shared by every code path that
// assigns points to weight levels so that L_j^q and L_j^x agree exactly.
double kernel_from_sq(const KernelConfig& cfg, double d2);

double eval_kernel(const KernelConfig& cfg, std::span<const double> a,
                   std::span<const double> b);

// J = ceil(log2(2n/mu)), clamped at 0 for the top mu level when 2n is not a
// power of two.
int level_count(double mu, std::int64_t n);

constexpr int kBeyondAll = std::numeric_limits<int>::max();

// Unclamped level: the j >= 1 with w in (2^-j, 2^-j+1]; kBeyondAll for w == 0.
int raw_level(double w);

int weight_level_index(double w, double mu, std::int64_t n);

struct WeightLevels {
  double mu = 1.0;
  std::int64_t n = 1;
  int J = 0;
  std::vector<double> radii;  // radii[j-1] = r_j
};

double level_radius(const KernelConfig& cfg, int j);

WeightLevels distance_levels(const KernelConfig& cfg, double mu, std::int64_t n);

// log2(n)^(1/7); n < 2 is treated as 2.
double distortion_cap(std::int64_t n);

// max over i = j+1..J+1 of ceil((i-j)/c_ij^2), c_ij = min(r_{i-1}/r_j, cap).
int level_exponent(const WeightLevels& wl, int j);

int compute_kj(const KernelConfig& cfg, double mu, std::int64_t n, int j,
               double p_near);

struct CostProfile {
  std::vector<int> kj;
  std::vector<double> per_level_cost;
  double cost = 1.0;
};

CostProfile cost_of_kernel(const KernelConfig& cfg, double mu, std::int64_t n,
                           double p_near);

}  // namespace dkde

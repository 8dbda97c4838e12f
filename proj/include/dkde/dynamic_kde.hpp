#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "dkde/kernel_levels.hpp"
#include "dkde/lsh.hpp"
#include "dkde/points.hpp"

namespace dkde {

struct KdeParams {
  double epsilon = 0.5;
  double C = 1.0;
  double rep_scale = 1.0;  // stands in for the constant 200 in K2
  double width_ratio = 4.0;
  // A unit keeps materialised bucket tables once it holds this many members;
  // smaller units answer the same bucket queries by scanning their members
  // and checking collisions directly. 0 = always tabled. Tables cost K2
  // entries per member, which at the low mu levels is far more than the
  // early-exit scans they save, so by default nothing is tabled.
  std::size_t table_cutoff = std::numeric_limits<std::size_t>::max();
  // Build a mu level from the current data the first time it is touched.
  bool lazy_levels = true;

  void validate() const;
};

struct KdeShape {
  std::int64_t n_prime = 1;
  int m_bar = 1;
  int N_bar = 1;
  int K1 = 1;
  int levels = 2;  // |M|
  double p_near = 0.0;
};

KdeShape kde_shape(const KdeParams& p, std::int64_t n_prime);

struct LevelGeom {
  int i = 0;
  double mu = 1.0;
  int J = 0;
  std::vector<double> r;     // r_j, j = 1..J at index j-1
  std::vector<int> k;        // k_j
  std::vector<int> K2;       // K2_j
  std::vector<double> p;     // sampling probability of level j
  double p_beyond = 1.0;
};

LevelGeom level_geometry(const KernelConfig& cfg, const KdeParams& p,
                         std::int64_t n_prime, int i);

struct LevelEstimate {
  int level = 0;
  std::vector<double> Z;     // K1 raw estimators
  std::vector<double> Zbar;  // N_bar block means
  double est = 0.0;          // median of Zbar
};

struct QueryRecord {
  PointId id = 0;
  bool live = false;
  double mu_hat = 0.0;
  int mu_level = 0;
  int stop = -1;  // level at which the descent stopped; -1 if it never did
  // Estimators of every level >= mu_level, ascending. Under insertions these
  // only grow, which is what lets an update settle the descent without
  // re-querying.
  std::vector<LevelEstimate> tracked;
  std::uint64_t members = 0;  // bit i: q in Q_{mu_i}
  std::vector<std::int32_t> member_pos;
  std::uint64_t updates = 0;

  const LevelEstimate& at_mu_level() const { return tracked.front(); }
  const LevelEstimate* level(int i) const {
    if (tracked.empty() || i < mu_level || i > tracked.back().level) return nullptr;
    return &tracked[i - mu_level];
  }
};

struct QueryResult {
  double estimate = 0.0;
  int mu_level = 0;
  int stop = -1;
};

struct KdeStats {
  std::size_t levels_built = 0;
  std::size_t reps_built = 0;
  std::size_t data_entries = 0;   // sum of |Z| over units
  std::size_t data_tabled_units = 0;
  std::size_t table_entries = 0;  // data + query bucket entries held in tables
  std::size_t bank_bytes = 0;
  std::size_t table_bytes = 0;
  std::uint64_t rebuilds = 0;
};

double median_of(std::vector<double> v);

// Bit i set iff mu_hat <= 2^i, over `levels` levels.
std::uint64_t membership_mask(double mu_hat, int levels);

class DynamicKde {
 public:
  DynamicKde(const KernelConfig& kernel, const KdeParams& params,
             std::uint64_t seed, int dim);
  ~DynamicKde();
  DynamicKde(DynamicKde&&) noexcept;
  DynamicKde& operator=(DynamicKde&&) noexcept;

  // n_prime = 0 means |X|.
  void initialise(const PointSet& X, const PointSet& Q, std::uint32_t epoch = 0,
                  std::int64_t n_prime = 0);

  double add_query_point(PointId id, std::span<const double> q);
  // Returns ids of maintained queries whose estimate changed.
  std::vector<PointId> add_data_point(PointId id, std::span<const double> z);
  bool delete_query_point(PointId id);

  QueryResult query_point(std::span<const double> q);
  double query_mu_estimate(std::span<const double> q, int level);
  LevelEstimate level_estimate(std::span<const double> q, int level);
  // Z_{q,a} at one (mu_i, a) slice; builds only that slice when lazy.
  double single_estimator(std::span<const double> q, int level, int a);

  bool has_query(PointId id) const;
  const QueryRecord* record(PointId id) const;
  double estimate(PointId id) const;
  std::vector<PointId> query_ids() const;
  std::vector<PointId> level_members(int level) const;

  int dim() const;
  std::int64_t n() const;
  std::int64_t n_prime() const;
  std::uint32_t epoch() const;
  const KdeShape& shape() const;
  const KdeParams& params() const;
  const KernelConfig& kernel() const;
  std::uint64_t seed() const;
  int levels() const;
  double mu(int i) const;
  const LevelGeom& geometry(int i) const;
  bool level_built(int i) const;
  std::span<const double> data_point(PointId id) const;
  const std::vector<PointId>& data_ids() const;
  KdeStats stats() const;

  // Materialise every level (canonical serialization does this itself).
  void build_all();

  // Canonical byte form: little-endian, length-prefixed sections, sorted keys
  // and id lists. See docs in kde_serialize.cpp.
  std::string serialize(bool with_query_buckets = true);
  std::string serialize_level(int level, bool with_query_buckets = true);

  // Throws std::logic_error on the first broken invariant.
  void check_invariants(bool deep = false) const;

  // Mean number of data points sharing q's bucket over every (a, j, l) of a
  // level, counting unit members regardless of weight level.
  double mean_query_bucket_load(std::span<const double> q, int level);

  // Exposed for tests: the data ids recovered for q at (level, a), and the
  // sampled sets of a slice (sorted ids; the slice is built if needed).
  std::vector<PointId> recovered(std::span<const double> q, int level, int a);
  std::vector<PointId> sampled_ids(int level, int a, int j);
  std::vector<PointId> beyond_ids(int level, int a);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  friend struct KdeSerializer;
};

}  // namespace dkde

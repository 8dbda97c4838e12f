#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "dkde/dynamic_kde.hpp"

namespace dkde {

// One (mu_i, a, j): the sampled set Z with its K2 hash functions, and the
// optional materialised data / query buckets.
struct Unit {
  HashBank bank;
  std::uint64_t coin_key = 0;
  std::vector<std::uint32_t> members;  // data slots
  std::unique_ptr<PackedBuckets> data;
  std::unique_ptr<PackedBuckets> queries;
};

struct Rep {
  bool built = false;
  std::vector<Unit> units;  // j = 1..J at j-1
  std::uint64_t beyond_key = 0;
  std::vector<std::uint32_t> beyond;
};

struct Level {
  LevelGeom g;
  std::vector<Rep> reps;
  int reps_built = 0;
  std::vector<std::uint32_t> qmembers;  // query slots of Q_{mu_i}
  bool qtabled = false;
};

// Lazily filled kernel weights of one anchor point against a point store.
struct WeightCache {
  std::vector<double> w;
  std::vector<int> lev;
  std::vector<std::uint32_t> stamp;
  std::uint32_t cur = 0;
  const double* anchor = nullptr;

  void begin(const double* a, std::size_t n) {
    anchor = a;
    if (stamp.size() < n) {
      w.resize(n);
      lev.resize(n);
      stamp.resize(n, 0);
    }
    if (++cur == 0) {
      std::fill(stamp.begin(), stamp.end(), 0);
      cur = 1;
    }
  }
};

struct DynamicKde::Impl {
  KernelConfig kernel;
  KdeParams params;
  std::uint64_t seed = 0;
  int dim = 0;
  std::uint32_t epoch = 0;
  KdeShape shape;
  std::uint64_t rebuilds = 0;

  std::vector<PointId> ids;
  std::vector<double> X;
  absl::flat_hash_map<PointId, std::uint32_t> slot_of;

  std::vector<double> Qx;
  std::vector<QueryRecord> recs;
  std::vector<std::uint32_t> free_q;
  absl::flat_hash_map<PointId, std::uint32_t> qslot_of;

  std::vector<Level> lv;

  WeightCache dcache;  // query anchor vs data slots
  WeightCache qcache;  // inserted point vs query slots

  const double* xp(std::uint32_t s) const { return X.data() + static_cast<std::size_t>(s) * dim; }
  const double* qp(std::uint32_t s) const { return Qx.data() + static_cast<std::size_t>(s) * dim; }
  double mu(int i) const { return std::ldexp(1.0, i); }
  int top() const { return shape.levels - 1; }

  void fill(WeightCache& c, std::uint32_t s, const double* p) const {
    double d2 = 0.0;
    for (int t = 0; t < dim; ++t) {
      double u = c.anchor[t] - p[t];
      d2 += u * u;
    }
    c.w[s] = kernel_from_sq(kernel, d2);
    c.lev[s] = raw_level(c.w[s]);
    c.stamp[s] = c.cur;
  }
  double dweight(std::uint32_t s) {
    if (dcache.stamp[s] != dcache.cur) fill(dcache, s, xp(s));
    return dcache.w[s];
  }
  int dlevel(std::uint32_t s, int J) {
    if (dcache.stamp[s] != dcache.cur) fill(dcache, s, xp(s));
    return std::min(dcache.lev[s], J + 1);
  }
  double qweight(std::uint32_t s) {
    if (qcache.stamp[s] != qcache.cur) fill(qcache, s, qp(s));
    return qcache.w[s];
  }
  int qlevel(std::uint32_t s, int J) {
    if (qcache.stamp[s] != qcache.cur) fill(qcache, s, qp(s));
    return std::min(qcache.lev[s], J + 1);
  }

  void reset(const PointSet& Xs, const PointSet& Qs, std::uint32_t ep, std::int64_t np);
  void ensure_rep(int i, int a);
  void ensure_built(int i);
  void table_data(Unit& u, int K2);
  void set_qtabled(int i, bool on);
  void refresh_qtabled(int i);
  void bstar(int i, std::uint32_t qs, bool insert);

  bool collides(Unit& u, int K2, const double* a, const double* b);
  void recover_rep(int i, int a, std::vector<std::pair<PointId, double>>& out);
  double sum_terms(std::vector<std::pair<PointId, double>>& terms) const;
  LevelEstimate estimate_level(int i);
  void finish_estimate(LevelEstimate& e) const;
  QueryResult descend(const double* q, std::vector<LevelEstimate>* keep);

  std::uint32_t add_query(PointId id, const double* q);
  void remove_query(std::uint32_t qs);
  void set_memberships(std::uint32_t qs, std::uint64_t mask);
  std::uint64_t target_mask(double mu_hat) const;
  bool resolve(std::uint32_t qs);

  std::vector<PointId> add_data(PointId id, const double* z);
  std::vector<PointId> rebuild_with(PointId id, const double* z);
};

}  // namespace dkde

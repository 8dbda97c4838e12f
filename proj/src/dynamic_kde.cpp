#include "dkde/dynamic_kde.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include "kde_internal.hpp"

namespace dkde {

namespace {

int ceil_tol(double v) { return static_cast<int>(std::ceil(v - 1e-9)); }

void fail(const std::string& what) { throw std::logic_error("kde invariant: " + what); }

}  // namespace

void KdeParams::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must lie in (0,1)");
  if (!(C > 0.0)) throw std::invalid_argument("C must be positive");
  if (!(rep_scale > 0.0)) throw std::invalid_argument("rep_scale must be positive");
  if (!(width_ratio > 0.0)) throw std::invalid_argument("width_ratio must be positive");
}

KdeShape kde_shape(const KdeParams& p, std::int64_t n_prime) {
  p.validate();
  if (n_prime < 1) throw std::invalid_argument("n' must be positive");
  KdeShape s;
  s.n_prime = n_prime;
  s.m_bar = std::max(1, ceil_tol(p.C / (p.epsilon * p.epsilon)));
  s.N_bar = level_count(1.0, n_prime);
  s.K1 = s.m_bar * s.N_bar;
  s.levels = s.N_bar + 1;
  s.p_near = collision_prob(p.width_ratio, 1.0);
  return s;
}

LevelGeom level_geometry(const KernelConfig& cfg, const KdeParams& p,
                         std::int64_t n_prime, int i) {
  LevelGeom g;
  g.i = i;
  g.mu = std::ldexp(1.0, i);
  g.J = level_count(g.mu, n_prime);
  WeightLevels wl;
  wl.mu = g.mu;
  wl.n = n_prime;
  wl.J = g.J;
  for (int j = 1; j <= g.J; ++j) wl.radii.push_back(level_radius(cfg, j));
  const double p_near = collision_prob(p.width_ratio, 1.0);
  const double lg = std::log2(static_cast<double>(std::max<std::int64_t>(n_prime, 2)));
  for (int j = 1; j <= g.J; ++j) {
    int e = level_exponent(wl, j);
    int k = std::max(1, ceil_tol(e / std::log2(1.0 / p_near)));
    double K2 = std::ceil(p.rep_scale * lg * std::pow(p_near, -k));
    g.r.push_back(wl.radii[j - 1]);
    g.k.push_back(k);
    g.K2.push_back(std::max(1, static_cast<int>(K2)));
    g.p.push_back(std::min(1.0, std::ldexp(1.0, -(j + 1 + i))));
  }
  g.p_beyond = 1.0 / (2.0 * static_cast<double>(n_prime));
  return g;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t m = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + m, v.end());
  double hi = v[m];
  if (v.size() % 2 == 1) return hi;
  double lo = *std::max_element(v.begin(), v.begin() + m);
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Construction and lazy level building

void DynamicKde::Impl::reset(const PointSet& Xs, const PointSet& Qs, std::uint32_t ep,
                             std::int64_t np) {
  if (Xs.empty()) throw std::invalid_argument("initialise: empty data set");
  if (Xs.dim != dim || (!Qs.empty() && Qs.dim != dim))
    throw std::invalid_argument("initialise: dimension mismatch");
  epoch = ep;
  shape = kde_shape(params, np > 0 ? np : static_cast<std::int64_t>(Xs.size()));

  ids = Xs.ids;
  X = Xs.coords;
  slot_of.clear();
  slot_of.reserve(ids.size());
  for (std::uint32_t s = 0; s < ids.size(); ++s)
    if (!slot_of.emplace(ids[s], s).second)
      throw std::invalid_argument("initialise: duplicate data id");

  Qx.clear();
  recs.clear();
  free_q.clear();
  qslot_of.clear();

  lv.clear();
  lv.resize(shape.levels);
  for (int i = 0; i < shape.levels; ++i) {
    lv[i].g = level_geometry(kernel, params, shape.n_prime, i);
    lv[i].reps.resize(shape.K1);
  }
  if (!params.lazy_levels)
    for (int i = 0; i < shape.levels; ++i) ensure_built(i);

  std::vector<std::size_t> order(Qs.size());
  for (std::size_t r = 0; r < order.size(); ++r) order[r] = r;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return Qs.ids[a] < Qs.ids[b]; });
  for (auto r : order) add_query(Qs.ids[r], Qs.point(r).data());
}

void DynamicKde::Impl::table_data(Unit& u, int K2) {
  u.bank.ensure(K2);
  u.data = std::make_unique<PackedBuckets>();
  std::vector<std::int64_t> key(u.bank.k());
  for (std::uint32_t s : u.members)
    for (int l = 0; l < K2; ++l) {
      u.bank.keys(l, xp(s), key.data());
      u.data->insert(bucket_fingerprint(l, key.data(), u.bank.k()), s);
    }
}

void DynamicKde::Impl::ensure_rep(int i, int a) {
  Level& L = lv[i];
  Rep& R = L.reps[a];
  if (R.built) return;
  const LevelGeom& g = L.g;
  const auto n = static_cast<std::uint32_t>(ids.size());
  R.units.resize(g.J);
  for (int j = 1; j <= g.J; ++j) {
    Unit& u = R.units[j - 1];
    SeedLabel lab{Purpose::hash, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(a),
                  static_cast<std::uint32_t>(j), 0, epoch};
    u.bank = HashBank(seed, lab, dim, g.k[j - 1], params.width_ratio * g.r[j - 1]);
    lab.purpose = Purpose::data_sample;
    u.coin_key = derive_key(seed, lab);
    const double p = g.p[j - 1];
    for (std::uint32_t s = 0; s < n; ++s)
      if (coin(u.coin_key, ids[s], p)) u.members.push_back(s);
    if (u.members.size() >= params.table_cutoff) table_data(u, g.K2[j - 1]);
  }
  R.beyond_key = derive_key(seed, SeedLabel{Purpose::beyond_sample, static_cast<std::uint32_t>(i),
                                            static_cast<std::uint32_t>(a), 0, 0, epoch});
  for (std::uint32_t s = 0; s < n; ++s)
    if (coin(R.beyond_key, ids[s], g.p_beyond)) R.beyond.push_back(s);
  R.built = true;
  ++L.reps_built;
  if (L.qtabled) {
    for (int j = 1; j <= g.J; ++j) R.units[j - 1].queries = std::make_unique<PackedBuckets>();
    // Only this repetition is new; fill its query tables.
    std::vector<std::int64_t> key;
    for (int j = 1; j <= g.J; ++j) {
      Unit& u = R.units[j - 1];
      const int K2 = g.K2[j - 1];
      u.bank.ensure(K2);
      key.resize(u.bank.k());
      for (std::uint32_t qs : L.qmembers)
        for (int l = 0; l < K2; ++l) {
          u.bank.keys(l, qp(qs), key.data());
          u.queries->insert(bucket_fingerprint(l, key.data(), u.bank.k()), qs);
        }
    }
  }
}

void DynamicKde::Impl::ensure_built(int i) {
  Level& L = lv[i];
  if (L.reps_built < shape.K1)
    for (int a = 0; a < shape.K1; ++a) ensure_rep(i, a);
  refresh_qtabled(i);
}

void DynamicKde::Impl::bstar(int i, std::uint32_t qs, bool insert) {
  Level& L = lv[i];
  std::vector<std::int64_t> key;
  for (Rep& R : L.reps) {
    if (!R.built) continue;
    for (int j = 1; j <= L.g.J; ++j) {
      Unit& u = R.units[j - 1];
      const int K2 = L.g.K2[j - 1];
      u.bank.ensure(K2);
      key.resize(u.bank.k());
      for (int l = 0; l < K2; ++l) {
        u.bank.keys(l, qp(qs), key.data());
        const auto fp = bucket_fingerprint(l, key.data(), u.bank.k());
        if (insert)
          u.queries->insert(fp, qs);
        else
          u.queries->erase(fp, qs);
      }
    }
  }
}

void DynamicKde::Impl::set_qtabled(int i, bool on) {
  Level& L = lv[i];
  if (L.qtabled == on) return;
  L.qtabled = on;
  for (Rep& R : L.reps)
    for (Unit& u : R.units) {
      if (on)
        u.queries = std::make_unique<PackedBuckets>();
      else
        u.queries.reset();
    }
  if (on)
    for (std::uint32_t qs : L.qmembers) bstar(i, qs, true);
}

void DynamicKde::Impl::refresh_qtabled(int i) {
  Level& L = lv[i];
  if (L.reps_built == 0) return;
  const std::size_t m = L.qmembers.size();
  const std::size_t cut = params.table_cutoff;
  if (!L.qtabled && m >= cut)
    set_qtabled(i, true);
  else if (L.qtabled && cut > 0 && 2 * m < cut)
    set_qtabled(i, false);
}

// ---------------------------------------------------------------------------
// Estimation

bool DynamicKde::Impl::collides(Unit& u, int K2, const double* a, const double* b) {
  for (int l = 0; l < K2; ++l) {
    if (l == u.bank.ready()) u.bank.ensure(std::min(K2, std::max(8, 2 * l)));
    if (u.bank.same_bucket(l, a, b)) return true;
  }
  return false;
}

void DynamicKde::Impl::recover_rep(int i, int a, std::vector<std::pair<PointId, double>>& out) {
  Level& L = lv[i];
  Rep& R = L.reps[a];
  const LevelGeom& g = L.g;
  const int J = g.J;
  const double* q = dcache.anchor;
  std::vector<std::int64_t> key;
  std::vector<std::uint32_t> cand;
  for (int j = 1; j <= J; ++j) {
    Unit& u = R.units[j - 1];
    const int K2 = g.K2[j - 1];
    const double p = g.p[j - 1];
    if (u.data) {
      cand.clear();
      key.resize(u.bank.k());
      for (int l = 0; l < K2; ++l) {
        u.bank.keys(l, q, key.data());
        u.data->for_each_match(bucket_fingerprint(l, key.data(), u.bank.k()), [&](PointId s) {
          if (dlevel(s, J) != j) return;
          for (int r = 0; r < u.bank.k(); ++r)
            if (u.bank.key_at(l, r, xp(s)) != key[r]) return;
          cand.push_back(s);
        });
      }
      std::sort(cand.begin(), cand.end());
      cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
      for (auto s : cand) out.emplace_back(ids[s], dweight(s) / p);
    } else {
      for (std::uint32_t s : u.members)
        if (dlevel(s, J) == j && collides(u, K2, q, xp(s))) out.emplace_back(ids[s], dweight(s) / p);
    }
  }
  for (std::uint32_t s : R.beyond)
    if (dlevel(s, J) == J + 1) out.emplace_back(ids[s], dweight(s) / g.p_beyond);
}

double DynamicKde::Impl::sum_terms(std::vector<std::pair<PointId, double>>& terms) const {
  std::sort(terms.begin(), terms.end());
  double z = 0.0;
  for (auto& t : terms) z += t.second;
  return z;
}

void DynamicKde::Impl::finish_estimate(LevelEstimate& e) const {
  const int mb = shape.m_bar;
  e.Zbar.assign(shape.N_bar, 0.0);
  for (int b = 0; b < shape.N_bar; ++b) {
    double s = 0.0;
    for (int t = 0; t < mb; ++t) s += e.Z[b * mb + t];
    e.Zbar[b] = s / mb;
  }
  e.est = median_of(e.Zbar);
}

LevelEstimate DynamicKde::Impl::estimate_level(int i) {
  LevelEstimate e;
  e.level = i;
  e.Z.assign(shape.K1, 0.0);
  std::vector<std::pair<PointId, double>> terms;
  for (int a = 0; a < shape.K1; ++a) {
    terms.clear();
    recover_rep(i, a, terms);
    e.Z[a] = sum_terms(terms);
  }
  finish_estimate(e);
  return e;
}

QueryResult DynamicKde::Impl::descend(const double* q, std::vector<LevelEstimate>* keep) {
  dcache.begin(q, ids.size());
  std::vector<LevelEstimate> vis;
  QueryResult res;
  for (int i = top(); i >= 0; --i) {
    ensure_built(i);
    vis.push_back(estimate_level(i));
    if (vis.back().est > mu(i)) {
      res.stop = i;
      break;
    }
  }
  // vis runs from the top level downwards.
  std::size_t keep_n;
  if (res.stop < 0) {
    // No level fired: the lowest level's sum is still unbiased below mu_0.
    res.estimate = vis.back().est;
    res.mu_level = 0;
    keep_n = vis.size();
  } else if (res.stop == top()) {
    // Nothing above the top level to fall back on; report its own estimate.
    res.estimate = vis[0].est;
    res.mu_level = top();
    keep_n = 1;
  } else {
    res.mu_level = res.stop + 1;
    res.estimate = vis[vis.size() - 2].est;
    keep_n = vis.size() - 1;
  }
  if (keep) {
    keep->clear();
    for (std::size_t t = keep_n; t-- > 0;) keep->push_back(std::move(vis[t]));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Query maintenance

std::uint64_t membership_mask(double mu_hat, int levels) {
  std::uint64_t m = 0;
  for (int i = 0; i < levels; ++i)
    if (mu_hat <= std::ldexp(1.0, i)) m |= 1ULL << i;
  return m;
}

std::uint64_t DynamicKde::Impl::target_mask(double mu_hat) const {
  return membership_mask(mu_hat, shape.levels);
}

void DynamicKde::Impl::set_memberships(std::uint32_t qs, std::uint64_t mask) {
  for (int i = 0; i < shape.levels; ++i) {
    const bool had = recs[qs].members >> i & 1ULL;
    const bool want = mask >> i & 1ULL;
    if (had == want) continue;
    Level& L = lv[i];
    if (want) {
      // Membership alone does not build a level: insertions only touch
      // tracked estimators, and a later build fills its query tables.
      QueryRecord& rec = recs[qs];
      rec.member_pos[i] = static_cast<std::int32_t>(L.qmembers.size());
      L.qmembers.push_back(qs);
      rec.members |= 1ULL << i;
      if (L.qtabled) bstar(i, qs, true);
    } else {
      QueryRecord& rec = recs[qs];
      if (L.qtabled) bstar(i, qs, false);
      const std::int32_t pos = rec.member_pos[i];
      const std::uint32_t last = L.qmembers.back();
      L.qmembers[pos] = last;
      recs[last].member_pos[i] = pos;
      L.qmembers.pop_back();
      rec.member_pos[i] = -1;
      rec.members &= ~(1ULL << i);
    }
    refresh_qtabled(i);
  }
}

std::uint32_t DynamicKde::Impl::add_query(PointId id, const double* q) {
  if (auto it = qslot_of.find(id); it != qslot_of.end()) remove_query(it->second);
  std::uint32_t qs;
  if (!free_q.empty()) {
    qs = free_q.back();
    free_q.pop_back();
  } else {
    qs = static_cast<std::uint32_t>(recs.size());
    recs.emplace_back();
    Qx.resize(Qx.size() + dim);
  }
  std::copy(q, q + dim, Qx.begin() + static_cast<std::ptrdiff_t>(qs) * dim);
  QueryRecord& rec = recs[qs];
  rec = QueryRecord{};
  rec.id = id;
  rec.live = true;
  rec.member_pos.assign(shape.levels, -1);
  QueryResult r = descend(qp(qs), &recs[qs].tracked);
  QueryRecord& rr = recs[qs];
  rr.mu_hat = r.estimate;
  rr.mu_level = r.mu_level;
  rr.stop = r.stop;
  qslot_of[id] = qs;
  set_memberships(qs, target_mask(r.estimate));
  return qs;
}

void DynamicKde::Impl::remove_query(std::uint32_t qs) {
  set_memberships(qs, 0);
  QueryRecord& rec = recs[qs];
  qslot_of.erase(rec.id);
  rec = QueryRecord{};
  free_q.push_back(qs);
}

// Settle the descent after tracked estimators grew. Every level from the
// tracked range whose estimate now exceeds its mu is a candidate stop; the
// descent from the top meets the highest one first.
bool DynamicKde::Impl::resolve(std::uint32_t qs) {
  QueryRecord& rec = recs[qs];
  const double old = rec.mu_hat;
  int s = -1;
  for (auto it = rec.tracked.rbegin(); it != rec.tracked.rend(); ++it)
    if (it->est > mu(it->level)) {
      s = it->level;
      break;
    }
  if (s < 0) {
    rec.mu_hat = rec.tracked.front().est;
  } else {
    int new_level = std::min(s + 1, top());
    if (s != rec.stop) rec.updates += shape.K1;
    rec.stop = s;
    if (new_level > rec.mu_level)
      rec.tracked.erase(rec.tracked.begin(), rec.tracked.begin() + (new_level - rec.mu_level));
    rec.mu_level = new_level;
    rec.mu_hat = rec.tracked.front().est;
  }
  if (rec.mu_hat == old) return false;
  set_memberships(qs, target_mask(rec.mu_hat));
  return true;
}

// ---------------------------------------------------------------------------
// Data insertion

std::vector<PointId> DynamicKde::Impl::rebuild_with(PointId id, const double* z) {
  PointSet Xs(dim);
  Xs.ids = ids;
  Xs.coords = X;
  Xs.push(id, {z, static_cast<std::size_t>(dim)});
  PointSet Qs(dim);
  std::vector<std::uint64_t> upd;
  for (std::uint32_t qs = 0; qs < recs.size(); ++qs)
    if (recs[qs].live) {
      Qs.push(recs[qs].id, {qp(qs), static_cast<std::size_t>(dim)});
      upd.push_back(recs[qs].updates);
    }
  ++rebuilds;
  const std::uint64_t saved = rebuilds;
  reset(Xs, Qs, epoch + 1, 0);
  rebuilds = saved;
  std::vector<PointId> changed;
  for (std::size_t r = 0; r < Qs.size(); ++r) {
    QueryRecord& rec = recs[qslot_of.at(Qs.ids[r])];
    rec.updates = upd[r] + shape.K1;
    changed.push_back(Qs.ids[r]);
  }
  std::sort(changed.begin(), changed.end());
  return changed;
}

std::vector<PointId> DynamicKde::Impl::add_data(PointId id, const double* z) {
  if (slot_of.contains(id)) throw std::invalid_argument("add_data_point: duplicate data id");
  const std::int64_t n_new = static_cast<std::int64_t>(ids.size()) + 1;
  if (n_new - shape.n_prime > shape.n_prime) return rebuild_with(id, z);

  const auto zs = static_cast<std::uint32_t>(ids.size());
  ids.push_back(id);
  X.insert(X.end(), z, z + dim);
  slot_of.emplace(id, zs);
  const double* zp = xp(zs);
  qcache.begin(zp, recs.size());

  struct Upd {
    std::uint32_t qs;
    int i, a;
    double term;
  };
  std::vector<Upd> ups;
  std::vector<std::int64_t> zkey, qkey;
  std::vector<std::uint32_t> cand;

  auto tracks = [&](std::uint32_t qs, int i) {
    const QueryRecord& r = recs[qs];
    return r.live && i >= r.mu_level && i <= r.tracked.back().level;
  };

  for (int i = 0; i < shape.levels; ++i) {
    Level& L = lv[i];
    if (L.reps_built == 0) continue;
    const LevelGeom& g = L.g;
    const int J = g.J;
    for (int a = 0; a < shape.K1; ++a) {
      Rep& R = L.reps[a];
      if (!R.built) continue;
      for (int j = 1; j <= J; ++j) {
        Unit& u = R.units[j - 1];
        const double p = g.p[j - 1];
        if (!coin(u.coin_key, id, p)) continue;
        const int K2 = g.K2[j - 1];
        u.members.push_back(zs);
        const int k = u.bank.k();
        const bool need_keys = u.data || u.queries;
        if (need_keys) {
          u.bank.ensure(K2);
          zkey.resize(static_cast<std::size_t>(K2) * k);
          for (int l = 0; l < K2; ++l) u.bank.keys(l, zp, zkey.data() + static_cast<std::size_t>(l) * k);
        }
        if (u.data) {
          for (int l = 0; l < K2; ++l)
            u.data->insert(bucket_fingerprint(l, zkey.data() + static_cast<std::size_t>(l) * k, k), zs);
        } else if (u.members.size() >= params.table_cutoff) {
          table_data(u, K2);
        }
        if (L.qmembers.empty()) continue;
        if (u.queries) {
          cand.clear();
          qkey.resize(k);
          for (int l = 0; l < K2; ++l) {
            const std::int64_t* zk = zkey.data() + static_cast<std::size_t>(l) * k;
            u.queries->for_each_match(bucket_fingerprint(l, zk, k), [&](PointId qs) {
              if (!tracks(qs, i) || qlevel(qs, J) != j) return;
              for (int r = 0; r < k; ++r)
                if (u.bank.key_at(l, r, qp(qs)) != zk[r]) return;
              cand.push_back(qs);
            });
          }
          std::sort(cand.begin(), cand.end());
          cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
          for (auto qs : cand) ups.push_back({qs, i, a, qweight(qs) / p});
        } else {
          for (std::uint32_t qs : L.qmembers)
            if (tracks(qs, i) && qlevel(qs, J) == j && collides(u, K2, zp, qp(qs)))
              ups.push_back({qs, i, a, qweight(qs) / p});
        }
      }
      if (coin(R.beyond_key, id, g.p_beyond)) {
        R.beyond.push_back(zs);
        for (std::uint32_t qs : L.qmembers)
          if (tracks(qs, i) && qlevel(qs, J) == J + 1)
            ups.push_back({qs, i, a, qweight(qs) / g.p_beyond});
      }
    }
  }

  std::sort(ups.begin(), ups.end(), [](const Upd& x, const Upd& y) {
    return std::tie(x.qs, x.i, x.a) < std::tie(y.qs, y.i, y.a);
  });
  std::vector<PointId> changed;
  for (std::size_t t = 0; t < ups.size();) {
    const std::uint32_t qs = ups[t].qs;
    QueryRecord& rec = recs[qs];
    while (t < ups.size() && ups[t].qs == qs) {
      const int i = ups[t].i;
      LevelEstimate& e = rec.tracked[i - rec.mu_level];
      while (t < ups.size() && ups[t].qs == qs && ups[t].i == i) {
        e.Z[ups[t].a] += ups[t].term;
        ++rec.updates;
        ++t;
      }
      finish_estimate(e);
    }
    if (resolve(qs)) changed.push_back(rec.id);
  }
  std::sort(changed.begin(), changed.end());
  return changed;
}

// ---------------------------------------------------------------------------
// Public surface

DynamicKde::DynamicKde(const KernelConfig& kernel, const KdeParams& params,
                       std::uint64_t seed, int dim)
    : impl_(std::make_unique<Impl>()) {
  kernel.validate();
  params.validate();
  if (dim < 1) throw std::invalid_argument("dimension must be positive");
  impl_->kernel = kernel;
  impl_->params = params;
  impl_->seed = seed;
  impl_->dim = dim;
}

DynamicKde::~DynamicKde() = default;
DynamicKde::DynamicKde(DynamicKde&&) noexcept = default;
DynamicKde& DynamicKde::operator=(DynamicKde&&) noexcept = default;

void DynamicKde::initialise(const PointSet& X, const PointSet& Q, std::uint32_t epoch,
                            std::int64_t n_prime) {
  impl_->reset(X, Q, epoch, n_prime);
}

double DynamicKde::add_query_point(PointId id, std::span<const double> q) {
  if (static_cast<int>(q.size()) != impl_->dim) throw std::invalid_argument("dimension mismatch");
  if (impl_->lv.empty()) throw std::logic_error("kde not initialised");
  return impl_->recs[impl_->add_query(id, q.data())].mu_hat;
}

std::vector<PointId> DynamicKde::add_data_point(PointId id, std::span<const double> z) {
  if (static_cast<int>(z.size()) != impl_->dim) throw std::invalid_argument("dimension mismatch");
  if (impl_->lv.empty()) throw std::logic_error("kde not initialised");
  return impl_->add_data(id, z.data());
}

bool DynamicKde::delete_query_point(PointId id) {
  auto it = impl_->qslot_of.find(id);
  if (it == impl_->qslot_of.end()) return false;
  impl_->remove_query(it->second);
  return true;
}

QueryResult DynamicKde::query_point(std::span<const double> q) {
  if (static_cast<int>(q.size()) != impl_->dim) throw std::invalid_argument("dimension mismatch");
  return impl_->descend(q.data(), nullptr);
}

LevelEstimate DynamicKde::level_estimate(std::span<const double> q, int level) {
  if (level < 0 || level >= levels()) throw std::invalid_argument("unknown mu level");
  if (static_cast<int>(q.size()) != impl_->dim) throw std::invalid_argument("dimension mismatch");
  impl_->ensure_built(level);
  impl_->dcache.begin(q.data(), impl_->ids.size());
  return impl_->estimate_level(level);
}

double DynamicKde::query_mu_estimate(std::span<const double> q, int level) {
  return level_estimate(q, level).est;
}

double DynamicKde::single_estimator(std::span<const double> q, int level, int a) {
  if (level < 0 || level >= levels() || a < 0 || a >= impl_->shape.K1)
    throw std::invalid_argument("unknown (level, repetition)");
  impl_->ensure_rep(level, a);
  impl_->dcache.begin(q.data(), impl_->ids.size());
  std::vector<std::pair<PointId, double>> terms;
  impl_->recover_rep(level, a, terms);
  return impl_->sum_terms(terms);
}

std::vector<PointId> DynamicKde::recovered(std::span<const double> q, int level, int a) {
  impl_->ensure_rep(level, a);
  impl_->dcache.begin(q.data(), impl_->ids.size());
  std::vector<std::pair<PointId, double>> terms;
  impl_->recover_rep(level, a, terms);
  std::vector<PointId> out;
  for (auto& t : terms) out.push_back(t.first);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<PointId> DynamicKde::sampled_ids(int level, int a, int j) {
  if (level < 0 || level >= levels() || a < 0 || a >= impl_->shape.K1)
    throw std::invalid_argument("unknown (level, repetition)");
  if (j < 1 || j > impl_->lv[level].g.J) throw std::invalid_argument("unknown weight level");
  impl_->ensure_rep(level, a);
  std::vector<PointId> out;
  for (auto s : impl_->lv[level].reps[a].units[j - 1].members) out.push_back(impl_->ids[s]);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<PointId> DynamicKde::beyond_ids(int level, int a) {
  if (level < 0 || level >= levels() || a < 0 || a >= impl_->shape.K1)
    throw std::invalid_argument("unknown (level, repetition)");
  impl_->ensure_rep(level, a);
  std::vector<PointId> out;
  for (auto s : impl_->lv[level].reps[a].beyond) out.push_back(impl_->ids[s]);
  std::sort(out.begin(), out.end());
  return out;
}

bool DynamicKde::has_query(PointId id) const { return impl_->qslot_of.contains(id); }

const QueryRecord* DynamicKde::record(PointId id) const {
  auto it = impl_->qslot_of.find(id);
  return it == impl_->qslot_of.end() ? nullptr : &impl_->recs[it->second];
}

double DynamicKde::estimate(PointId id) const {
  const QueryRecord* r = record(id);
  if (!r) throw std::out_of_range("unknown query id");
  return r->mu_hat;
}

std::vector<PointId> DynamicKde::query_ids() const {
  std::vector<PointId> out;
  for (auto& [id, s] : impl_->qslot_of) out.push_back(id);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<PointId> DynamicKde::level_members(int level) const {
  std::vector<PointId> out;
  for (auto qs : impl_->lv.at(level).qmembers) out.push_back(impl_->recs[qs].id);
  std::sort(out.begin(), out.end());
  return out;
}

int DynamicKde::dim() const { return impl_->dim; }
std::int64_t DynamicKde::n() const { return static_cast<std::int64_t>(impl_->ids.size()); }
std::int64_t DynamicKde::n_prime() const { return impl_->shape.n_prime; }
std::uint32_t DynamicKde::epoch() const { return impl_->epoch; }
const KdeShape& DynamicKde::shape() const { return impl_->shape; }
const KdeParams& DynamicKde::params() const { return impl_->params; }
const KernelConfig& DynamicKde::kernel() const { return impl_->kernel; }
std::uint64_t DynamicKde::seed() const { return impl_->seed; }
int DynamicKde::levels() const { return impl_->shape.levels; }
double DynamicKde::mu(int i) const { return impl_->mu(i); }
const LevelGeom& DynamicKde::geometry(int i) const { return impl_->lv.at(i).g; }
bool DynamicKde::level_built(int i) const {
  return impl_->lv.at(i).reps_built == impl_->shape.K1;
}
const std::vector<PointId>& DynamicKde::data_ids() const { return impl_->ids; }

std::span<const double> DynamicKde::data_point(PointId id) const {
  auto s = impl_->slot_of.at(id);
  return {impl_->xp(s), static_cast<std::size_t>(impl_->dim)};
}

void DynamicKde::build_all() {
  for (int i = 0; i < levels(); ++i) impl_->ensure_built(i);
}

KdeStats DynamicKde::stats() const {
  KdeStats st;
  st.rebuilds = impl_->rebuilds;
  for (const Level& L : impl_->lv) {
    if (L.reps_built == impl_->shape.K1) ++st.levels_built;
    st.reps_built += L.reps_built;
    for (const Rep& R : L.reps)
      for (const Unit& u : R.units) {
        st.data_entries += u.members.size();
        st.bank_bytes += u.bank.memory_bytes();
        if (u.data) {
          ++st.data_tabled_units;
          st.table_entries += u.data->size();
          st.table_bytes += u.data->memory_bytes();
        }
        if (u.queries) {
          st.table_entries += u.queries->size();
          st.table_bytes += u.queries->memory_bytes();
        }
      }
  }
  return st;
}

double DynamicKde::mean_query_bucket_load(std::span<const double> q, int level) {
  Impl& m = *impl_;
  m.ensure_built(level);
  Level& L = m.lv[level];
  double total = 0.0;
  std::size_t tables = 0;
  for (Rep& R : L.reps)
    for (int j = 1; j <= L.g.J; ++j) {
      Unit& u = R.units[j - 1];
      const int K2 = L.g.K2[j - 1];
      u.bank.ensure(K2);
      for (int l = 0; l < K2; ++l) {
        for (auto s : u.members) total += u.bank.same_bucket(l, q.data(), m.xp(s)) ? 1.0 : 0.0;
        ++tables;
      }
    }
  return tables ? total / static_cast<double>(tables) : 0.0;
}

void DynamicKde::check_invariants(bool deep) const {
  Impl& m = *impl_;
  const KdeShape& sh = m.shape;
  if (m.lv.empty()) return;
  if (n() - sh.n_prime > sh.n_prime) fail("doubling rule");
  if (sh.levels != level_count(1.0, sh.n_prime) + 1) fail("level count");
  if (sh.K1 != sh.m_bar * sh.N_bar) fail("K1");

  for (std::uint32_t qs = 0; qs < m.recs.size(); ++qs) {
    const QueryRecord& r = m.recs[qs];
    if (!r.live) continue;
    if (r.tracked.empty()) fail("query without estimators");
    for (std::size_t t = 0; t < r.tracked.size(); ++t) {
      const LevelEstimate& e = r.tracked[t];
      if (e.level != r.mu_level + static_cast<int>(t)) fail("tracked range not contiguous");
      if (static_cast<int>(e.Z.size()) != sh.K1 || static_cast<int>(e.Zbar.size()) != sh.N_bar)
        fail("estimator sizes");
      LevelEstimate again = e;
      m.finish_estimate(again);
      if (again.Zbar != e.Zbar) fail("block means not recomputable");
      if (again.est != e.est) fail("median not recomputable");
    }
    if (r.tracked.back().level != m.top()) fail("tracked range must reach the top level");
    if (r.mu_hat != r.tracked.front().est) fail("mu_hat differs from the estimate at mu_level");
    if (r.members != m.target_mask(r.mu_hat)) fail("membership rule");
    for (int i = 0; i < sh.levels; ++i) {
      const bool in = r.members >> i & 1ULL;
      if (in != (r.member_pos[i] >= 0)) fail("member position");
      if (in && m.lv[i].qmembers[r.member_pos[i]] != qs) fail("member list");
    }
  }
  for (int i = 0; i < sh.levels; ++i) {
    const Level& L = m.lv[i];
    for (std::size_t t = 0; t < L.qmembers.size(); ++t)
      if (m.recs[L.qmembers[t]].member_pos[i] != static_cast<std::int32_t>(t)) fail("member index");
    if (L.qtabled && L.reps_built == 0) fail("query tables on an unbuilt level");
  }
  if (!deep) return;

  std::vector<std::int64_t> key;
  for (int i = 0; i < sh.levels; ++i) {
    Level& L = m.lv[i];
    for (int a = 0; a < sh.K1; ++a) {
      Rep& R = L.reps[a];
      if (!R.built) continue;
      for (int j = 1; j <= L.g.J; ++j) {
        Unit& u = R.units[j - 1];
        std::vector<std::uint32_t> expect;
        for (std::uint32_t s = 0; s < m.ids.size(); ++s)
          if (coin(u.coin_key, m.ids[s], L.g.p[j - 1])) expect.push_back(s);
        std::vector<std::uint32_t> got = u.members;
        std::sort(got.begin(), got.end());
        if (got != expect) fail("sampled set differs from its coins");
        const int K2 = L.g.K2[j - 1];
        const int k = u.bank.k();
        key.resize(k);
        if (u.data) {
          if (u.data->size() != u.members.size() * static_cast<std::size_t>(K2)) fail("data table size");
          for (auto s : u.members)
            for (int l = 0; l < K2; ++l) {
              u.bank.keys(l, m.xp(s), key.data());
              if (!u.data->contains(bucket_fingerprint(l, key.data(), k), s)) fail("data bucket entry");
            }
        }
        if (L.qtabled != static_cast<bool>(u.queries)) fail("query table presence");
        if (u.queries) {
          if (u.queries->size() != L.qmembers.size() * static_cast<std::size_t>(K2))
            fail("query table size");
          for (auto qs : L.qmembers)
            for (int l = 0; l < K2; ++l) {
              u.bank.keys(l, m.qp(qs), key.data());
              if (!u.queries->contains(bucket_fingerprint(l, key.data(), k), qs))
                fail("query bucket entry");
            }
        }
      }
      std::vector<std::uint32_t> expect;
      for (std::uint32_t s = 0; s < m.ids.size(); ++s)
        if (coin(R.beyond_key, m.ids[s], L.g.p_beyond)) expect.push_back(s);
      std::vector<std::uint32_t> got = R.beyond;
      std::sort(got.begin(), got.end());
      if (got != expect) fail("beyond sample differs from its coins");
    }
  }
  // Incrementally maintained estimators agree with a fresh recovery.
  for (std::uint32_t qs = 0; qs < m.recs.size(); ++qs) {
    const QueryRecord& r = m.recs[qs];
    if (!r.live) continue;
    m.dcache.begin(m.qp(qs), m.ids.size());
    for (const LevelEstimate& e : r.tracked) {
      if (m.lv[e.level].reps_built != sh.K1) fail("tracked level not built");
      LevelEstimate f = m.estimate_level(e.level);
      for (int a = 0; a < sh.K1; ++a)
        if (std::abs(f.Z[a] - e.Z[a]) > 1e-9 * std::max(1.0, std::abs(f.Z[a])))
          fail("incremental estimator differs from fresh recovery");
    }
  }
}

}  // namespace dkde

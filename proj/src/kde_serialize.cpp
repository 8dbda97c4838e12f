// Canonical byte form of a DynamicKde.
//
// All integers little-endian. A section is a u64 byte length followed by its
// payload. Layout:
//
//   "DKDE" u32 version
//   u64 n'  u64 n  u32 epoch  u32 K1  u32 levels  u32 dim
//   per level i:  section {
//     u32 i  u32 J
//     per (a, j):  u32 K2  u32 k
//                  ids(Z)                      sorted point ids
//                  per l: u32 #buckets, then per bucket in key order:
//                         k x i64 key, ids
//                  [per l: the same for the query buckets B*]
//     per a:       ids(beyond sample)
//     ids(Q_{mu_i})
//   }
//
// ids(.) is a u32 count followed by u32 ids. Buckets are regenerated from the
// sampled sets and the hash functions; every regenerated entry is checked
// against the materialised tables, so the form describes the tables too.

#include <algorithm>
#include <bit>
#include <cstring>
#include <stdexcept>

#include "kde_internal.hpp"

namespace dkde {

namespace {

static_assert(std::endian::native == std::endian::little);

struct Writer {
  std::string out;
  // Little-endian on every supported target; the static_assert below pins it.
  template <class T>
  void raw(const T* p, std::size_t count) {
    out.append(reinterpret_cast<const char*>(p), count * sizeof(T));
  }
  void u32(std::uint32_t v) { raw(&v, 1); }
  void u64(std::uint64_t v) { raw(&v, 1); }
  void i64(std::int64_t v) { raw(&v, 1); }
  void ids(std::vector<PointId> v) {
    std::sort(v.begin(), v.end());
    u32(static_cast<std::uint32_t>(v.size()));
    static_assert(sizeof(PointId) == 4);
    raw(v.data(), v.size());
  }
};

}  // namespace

struct KdeSerializer {
  static void buckets(DynamicKde::Impl& m, Writer& w, Unit& u, int K2,
                      const std::vector<std::uint32_t>& slots, bool queries) {
    const int k = u.bank.k();
    u.bank.ensure(K2);
    PackedBuckets* tab = queries ? u.queries.get() : u.data.get();
    const std::size_t m_ = slots.size();
    std::vector<std::int64_t> keys(m_ * k);
    std::vector<PointId> id(m_);
    std::vector<std::size_t> ord(m_);
    for (int l = 0; l < K2; ++l) {
      for (std::size_t t = 0; t < m_; ++t) {
        const auto s = slots[t];
        const double* p = queries ? m.qp(s) : m.xp(s);
        std::int64_t* key = keys.data() + t * k;
        u.bank.keys(l, p, key);
        if (tab && !tab->contains(bucket_fingerprint(l, key, k), s))
          throw std::logic_error("serialize: bucket entry missing from its table");
        id[t] = queries ? m.recs[s].id : m.ids[s];
        ord[t] = t;
      }
      auto key_of = [&](std::size_t t) { return keys.begin() + static_cast<std::ptrdiff_t>(t * k); };
      std::sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) {
        return std::lexicographical_compare(key_of(a), key_of(a) + k, key_of(b), key_of(b) + k);
      });
      std::uint32_t groups = 0;
      for (std::size_t t = 0; t < m_; ++t)
        groups += t == 0 || !std::equal(key_of(ord[t]), key_of(ord[t]) + k, key_of(ord[t - 1]));
      w.u32(groups);
      for (std::size_t t = 0; t < m_;) {
        std::size_t e = t;
        std::vector<PointId> v;
        while (e < m_ && std::equal(key_of(ord[e]), key_of(ord[e]) + k, key_of(ord[t]))) v.push_back(id[ord[e++]]);
        w.raw(&*key_of(ord[t]), static_cast<std::size_t>(k));
        w.ids(std::move(v));
        t = e;
      }
    }
  }

  // Appends the section for level i to w, length prefix included.
  static void level(DynamicKde::Impl& m, Writer& w, int i, bool with_queries) {
    m.ensure_built(i);
    Level& L = m.lv[i];
    const std::size_t at = w.out.size();
    w.u64(0);
    w.u32(static_cast<std::uint32_t>(i));
    w.u32(static_cast<std::uint32_t>(L.g.J));
    for (int a = 0; a < m.shape.K1; ++a) {
      Rep& R = L.reps[a];
      for (int j = 1; j <= L.g.J; ++j) {
        Unit& u = R.units[j - 1];
        const int K2 = L.g.K2[j - 1];
        w.u32(static_cast<std::uint32_t>(K2));
        w.u32(static_cast<std::uint32_t>(u.bank.k()));
        std::vector<PointId> z;
        for (auto s : u.members) z.push_back(m.ids[s]);
        w.ids(z);
        buckets(m, w, u, K2, u.members, false);
        if (with_queries) buckets(m, w, u, K2, L.qmembers, true);
      }
    }
    for (int a = 0; a < m.shape.K1; ++a) {
      std::vector<PointId> b;
      for (auto s : L.reps[a].beyond) b.push_back(m.ids[s]);
      w.ids(b);
    }
    std::vector<PointId> q;
    for (auto qs : L.qmembers) q.push_back(m.recs[qs].id);
    w.ids(q);
    const std::uint64_t len = w.out.size() - at - sizeof(std::uint64_t);
    std::memcpy(w.out.data() + at, &len, sizeof len);
  }
};

std::string DynamicKde::serialize_level(int level, bool with_query_buckets) {
  if (level < 0 || level >= levels()) throw std::invalid_argument("unknown mu level");
  Writer w;
  KdeSerializer::level(*impl_, w, level, with_query_buckets);
  return w.out.substr(sizeof(std::uint64_t));
}

std::string DynamicKde::serialize(bool with_query_buckets) {
  Writer w;
  w.out = "DKDE";
  w.u32(1);
  w.u64(static_cast<std::uint64_t>(impl_->shape.n_prime));
  w.u64(static_cast<std::uint64_t>(n()));
  w.u32(impl_->epoch);
  w.u32(static_cast<std::uint32_t>(impl_->shape.K1));
  w.u32(static_cast<std::uint32_t>(impl_->shape.levels));
  w.u32(static_cast<std::uint32_t>(impl_->dim));
  for (int i = 0; i < levels(); ++i)
    KdeSerializer::level(*impl_, w, i, with_query_buckets);
  return w.out;
}

}  // namespace dkde

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "dkde/points.hpp"
#include "dkde/rng.hpp"

namespace dkde {

using BucketKey = std::vector<std::int64_t>;

// p-stable (Gaussian) projections, quantised: key[i] = floor((<a_i,x> + b_i)/w).
struct HashFunctionSpec {
  int dim = 0;
  int k = 0;
  std::vector<double> projections;  // k x dim, row-major
  std::vector<double> offsets;      // k, in [0, width)
  double width = 0.0;
  std::uint64_t seed_key = 0;
};

HashFunctionSpec draw_hash(int dim, double r_near, double width_ratio, int k,
                           std::uint64_t seed_key);

BucketKey hash_point(const HashFunctionSpec& spec, std::span<const double> x);

// Single-projection collision probability at distance c (in units of r_near)
// for bucket width width_ratio * r_near.
double collision_prob(double width_ratio, double c);

// The row computations shared by the spec above and the packed banks below.
inline double project_row(const double* row, const double* x, int dim) {
  double s = 0.0;
  for (int c = 0; c < dim; ++c) s += row[c] * x[c];
  return s;
}

inline std::int64_t quantise(double proj, double offset, double width) {
  return static_cast<std::int64_t>(std::floor((proj + offset) / width));
}

// Fill `row` (dim doubles) and return the offset for row r of the stream
// keyed by `key`; draw_hash and HashBank both go through this.
double draw_row(std::uint64_t key, int r, int dim, double width, double* row);

struct BucketKeyHash {
  std::size_t operator()(const BucketKey& k) const;
};

class BucketTable {
 public:
  void insert(const BucketKey& key, PointId id);
  void remove(const BucketKey& key, PointId id);
  // Empty span when the bucket does not exist.
  std::span<const PointId> lookup(const BucketKey& key) const;
  bool contains(const BucketKey& key, PointId id) const;
  std::size_t bucket_count() const { return map_.size(); }
  std::size_t size() const { return size_; }

  template <class F>
  void for_each(F&& f) const {
    for (const auto& [k, ids] : map_) f(k, std::span<const PointId>(ids));
  }

 private:
  absl::flat_hash_map<BucketKey, std::vector<PointId>, BucketKeyHash> map_;
  std::size_t size_ = 0;
};

// ---------------------------------------------------------------------------
// Packed storage used inside the KDE structure.

// K2 concatenated hash functions of one (mu_i, a, j) unit, generated lazily
// one table at a time from per-copy seed keys.
class HashBank {
 public:
  HashBank() = default;
  HashBank(std::uint64_t master, SeedLabel base, int dim, int k, double width)
      : master_(master), base_(base), dim_(dim), k_(k), width_(width) {}

  int k() const { return k_; }
  int dim() const { return dim_; }
  double width() const { return width_; }
  int ready() const { return ready_; }

  void ensure(int tables);
  const double* row(int l, int r) const {
    return rows_.data() + (static_cast<std::size_t>(l) * k_ + r) * dim_;
  }
  double offset(int l, int r) const { return offs_[static_cast<std::size_t>(l) * k_ + r]; }

  std::int64_t key_at(int l, int r, const double* x) const {
    return quantise(project_row(row(l, r), x, dim_), offset(l, r), width_);
  }
  void keys(int l, const double* x, std::int64_t* out) const {
    for (int r = 0; r < k_; ++r) out[r] = key_at(l, r, x);
  }
  // Do x and y share the table-l bucket? Stops at the first differing row.
  bool same_bucket(int l, const double* x, const double* y) const {
    for (int r = 0; r < k_; ++r)
      if (key_at(l, r, x) != key_at(l, r, y)) return false;
    return true;
  }
  // The exact HashFunctionSpec of table l (for tests and serialization).
  HashFunctionSpec spec(int l) const;
  std::uint64_t table_key(int l) const;
  std::size_t memory_bytes() const {
    return rows_.capacity() * sizeof(double) + offs_.capacity() * sizeof(double);
  }

 private:
  std::uint64_t master_ = 0;
  SeedLabel base_{};
  int dim_ = 0, k_ = 0;
  double width_ = 0.0;
  int ready_ = 0;
  std::vector<double> rows_;
  std::vector<double> offs_;
};

std::uint64_t bucket_fingerprint(int l, const std::int64_t* key, int k);

// Open-addressing multimap fingerprint -> id for all K2 tables of a unit.
// A slot packs a 32-bit tag of the fingerprint with a 32-bit id; candidates
// are verified against the exact key by the caller.
class PackedBuckets {
 public:
  void insert(std::uint64_t fp, PointId id);
  bool erase(std::uint64_t fp, PointId id);
  bool contains(std::uint64_t fp, PointId id) const;
  std::size_t size() const { return used_; }
  std::size_t memory_bytes() const { return slots_.capacity() * sizeof(std::uint64_t); }

  template <class F>
  void for_each_match(std::uint64_t fp, F&& f) const {
    if (slots_.empty()) return;
    const std::uint32_t t = tag_of(fp);
    std::size_t i = home(t);
    while (slots_[i] != 0) {
      if (static_cast<std::uint32_t>(slots_[i] >> 32) == t)
        f(static_cast<PointId>(slots_[i] & 0xffffffffu));
      if (++i == slots_.size()) i = 0;
    }
  }

 private:
  static std::uint32_t tag_of(std::uint64_t fp) {
    auto t = static_cast<std::uint32_t>(fp >> 32);
    return t == 0 ? 1u : t;
  }
  std::size_t home(std::uint32_t tag) const {
    return static_cast<std::size_t>((static_cast<std::uint64_t>(tag) * slots_.size()) >> 32);
  }
  void grow();

  std::vector<std::uint64_t> slots_;
  std::size_t used_ = 0;
};

}  // namespace dkde

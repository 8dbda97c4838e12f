#include "dkde/lsh.hpp"

#include <algorithm>
#include <numbers>
#include <stdexcept>

#include <absl/hash/hash.h>

namespace dkde {

namespace {
constexpr std::uint64_t kOffsetCounter = 1ULL << 48;
}

double draw_row(std::uint64_t key, int r, int dim, double width, double* row) {
  for (int c = 0; c < dim; ++c)
    row[c] = normal_at(key, static_cast<std::uint64_t>(r) * dim + c);
  return width * uniform_at(key, kOffsetCounter + r);
}

HashFunctionSpec draw_hash(int dim, double r_near, double width_ratio, int k,
                           std::uint64_t seed_key) {
  if (dim < 1 || k < 1) throw std::invalid_argument("draw_hash: dim and k must be >= 1");
  if (!(r_near > 0.0) || !(width_ratio > 0.0))
    throw std::invalid_argument("draw_hash: r_near and width_ratio must be positive");
  HashFunctionSpec s;
  s.dim = dim;
  s.k = k;
  s.width = width_ratio * r_near;
  s.seed_key = seed_key;
  s.projections.resize(static_cast<std::size_t>(k) * dim);
  s.offsets.resize(k);
  for (int r = 0; r < k; ++r)
    s.offsets[r] = draw_row(seed_key, r, dim, s.width, s.projections.data() + r * dim);
  return s;
}

BucketKey hash_point(const HashFunctionSpec& spec, std::span<const double> x) {
  if (static_cast<int>(x.size()) != spec.dim) throw std::invalid_argument("dimension mismatch");
  BucketKey key(spec.k);
  for (int r = 0; r < spec.k; ++r)
    key[r] = quantise(project_row(spec.projections.data() + r * spec.dim, x.data(), spec.dim),
                      spec.offsets[r], spec.width);
  return key;
}

double collision_prob(double width_ratio, double c) {
  if (!(width_ratio > 0.0)) throw std::invalid_argument("width_ratio must be positive");
  if (!(c >= 1.0)) throw std::invalid_argument("c must be >= 1");
  const double t = width_ratio / c;
  const double phi_neg = 0.5 * std::erfc(t / std::numbers::sqrt2);
  return 1.0 - 2.0 * phi_neg -
         (2.0 / (std::sqrt(2.0 * std::numbers::pi) * t)) * (1.0 - std::exp(-t * t / 2.0));
}

std::size_t BucketKeyHash::operator()(const BucketKey& k) const {
  return absl::Hash<BucketKey>{}(k);
}

void BucketTable::insert(const BucketKey& key, PointId id) {
  auto& ids = map_[key];
  if (std::find(ids.begin(), ids.end(), id) != ids.end()) return;
  ids.push_back(id);
  ++size_;
}

void BucketTable::remove(const BucketKey& key, PointId id) {
  auto it = map_.find(key);
  if (it == map_.end()) return;
  auto& ids = it->second;
  auto pos = std::find(ids.begin(), ids.end(), id);
  if (pos == ids.end()) return;
  *pos = ids.back();
  ids.pop_back();
  --size_;
  if (ids.empty()) map_.erase(it);
}

std::span<const PointId> BucketTable::lookup(const BucketKey& key) const {
  auto it = map_.find(key);
  if (it == map_.end()) return {};
  return it->second;
}

bool BucketTable::contains(const BucketKey& key, PointId id) const {
  auto ids = lookup(key);
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

// ---------------------------------------------------------------------------

std::uint64_t HashBank::table_key(int l) const {
  SeedLabel s = base_;
  s.copy = static_cast<std::uint32_t>(l);
  return derive_key(master_, s);
}

void HashBank::ensure(int tables) {
  if (tables <= ready_) return;
  rows_.resize(static_cast<std::size_t>(tables) * k_ * dim_);
  offs_.resize(static_cast<std::size_t>(tables) * k_);
  for (int l = ready_; l < tables; ++l) {
    const std::uint64_t key = table_key(l);
    for (int r = 0; r < k_; ++r)
      offs_[static_cast<std::size_t>(l) * k_ + r] =
          draw_row(key, r, dim_, width_, rows_.data() + (static_cast<std::size_t>(l) * k_ + r) * dim_);
  }
  ready_ = tables;
}

HashFunctionSpec HashBank::spec(int l) const {
  HashFunctionSpec s;
  s.dim = dim_;
  s.k = k_;
  s.width = width_;
  s.seed_key = table_key(l);
  s.projections.resize(static_cast<std::size_t>(k_) * dim_);
  s.offsets.resize(k_);
  for (int r = 0; r < k_; ++r)
    s.offsets[r] = draw_row(s.seed_key, r, dim_, width_, s.projections.data() + r * dim_);
  return s;
}

std::uint64_t bucket_fingerprint(int l, const std::int64_t* key, int k) {
  std::uint64_t h = mix64(0x243f6a8885a308d3ULL ^ static_cast<std::uint64_t>(l));
  for (int r = 0; r < k; ++r) h = mix64(h ^ static_cast<std::uint64_t>(key[r]));
  return h;
}

void PackedBuckets::grow() {
  std::vector<std::uint64_t> old;
  old.swap(slots_);
  slots_.assign(old.empty() ? 16 : old.size() * 2, 0);
  for (std::uint64_t s : old) {
    if (s == 0) continue;
    std::size_t i = home(static_cast<std::uint32_t>(s >> 32));
    while (slots_[i] != 0)
      if (++i == slots_.size()) i = 0;
    slots_[i] = s;
  }
}

void PackedBuckets::insert(std::uint64_t fp, PointId id) {
  if (4 * (used_ + 1) > 3 * slots_.size()) grow();
  const std::uint64_t v = (static_cast<std::uint64_t>(tag_of(fp)) << 32) | id;
  std::size_t i = home(tag_of(fp));
  while (slots_[i] != 0) {
    if (slots_[i] == v) return;
    if (++i == slots_.size()) i = 0;
  }
  slots_[i] = v;
  ++used_;
}

bool PackedBuckets::contains(std::uint64_t fp, PointId id) const {
  if (slots_.empty()) return false;
  const std::uint64_t v = (static_cast<std::uint64_t>(tag_of(fp)) << 32) | id;
  std::size_t i = home(tag_of(fp));
  while (slots_[i] != 0) {
    if (slots_[i] == v) return true;
    if (++i == slots_.size()) i = 0;
  }
  return false;
}

bool PackedBuckets::erase(std::uint64_t fp, PointId id) {
  if (slots_.empty()) return false;
  const std::uint64_t v = (static_cast<std::uint64_t>(tag_of(fp)) << 32) | id;
  const std::size_t cap = slots_.size();
  std::size_t i = home(tag_of(fp));
  while (slots_[i] != v) {
    if (slots_[i] == 0) return false;
    if (++i == cap) i = 0;
  }
  // Backward-shift deletion keeps every probe run contiguous.
  std::size_t j = i;
  for (;;) {
    if (++j == cap) j = 0;
    if (slots_[j] == 0) break;
    std::size_t h = home(static_cast<std::uint32_t>(slots_[j] >> 32));
    bool stays = (i <= j) ? (i < h && h <= j) : (i < h || h <= j);
    if (stays) continue;
    slots_[i] = slots_[j];
    i = j;
  }
  slots_[i] = 0;
  --used_;
  return true;
}

}  // namespace dkde

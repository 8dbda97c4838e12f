#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

// Counter-based randomness. Every random decision in the library is a pure
// function of (master seed, label, counter), so a point's coins do not depend
// on the order in which points arrive.

namespace dkde {

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

enum class Purpose : std::uint32_t {
  data_sample = 1,
  beyond_sample = 2,
  hash = 3,
  route = 4,
  user = 5,
};

struct SeedLabel {
  Purpose purpose = Purpose::user;
  std::uint32_t level = 0;  // mu index i
  std::uint32_t rep = 0;    // a
  std::uint32_t j = 0;
  std::uint32_t copy = 0;   // l
  std::uint32_t epoch = 0;
};

inline std::uint64_t derive_key(std::uint64_t master, const SeedLabel& s) {
  std::uint64_t h = mix64(master ^ 0x6a09e667f3bcc909ULL);
  h = mix64(h ^ static_cast<std::uint64_t>(s.purpose));
  h = mix64(h ^ ((static_cast<std::uint64_t>(s.level) << 32) | s.rep));
  h = mix64(h ^ ((static_cast<std::uint64_t>(s.j) << 32) | s.copy));
  h = mix64(h ^ s.epoch);
  return h;
}

inline std::uint64_t stream_word(std::uint64_t key, std::uint64_t counter) {
  return mix64(mix64(counter ^ key) + key);
}

// [0, 1) with 53 bits.
inline double to_unit(std::uint64_t w) {
  return static_cast<double>(w >> 11) * 0x1.0p-53;
}

inline double uniform_at(std::uint64_t key, std::uint64_t counter) {
  return to_unit(stream_word(key, counter));
}

inline bool coin(std::uint64_t key, std::uint64_t id, double p) {
  return uniform_at(key, id) < p;
}

// Box-Muller on counters (2t, 2t+1); returns the cosine branch. Portable
// across standard libraries, unlike std::normal_distribution.
inline double normal_at(std::uint64_t key, std::uint64_t t) {
  double u1 = (static_cast<double>(stream_word(key, 2 * t) >> 11) + 1.0) * 0x1.0p-53;
  double u2 = uniform_at(key, 2 * t + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Sequential generator for callers that just need a stream (datasets,
// k-means seeding, Monte-Carlo tests).
class Stream {
 public:
  explicit Stream(std::uint64_t seed, std::uint64_t tag = 0)
      : key_(mix64(seed ^ mix64(tag + 0x51ed270b27a1f3c5ULL))) {}

  std::uint64_t next() { return stream_word(key_, ctr_++); }
  double uniform() { return to_unit(next()); }
  double normal() {
    double u1 = (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  // Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * bound) >> 64);
  }

 private:
  std::uint64_t key_;
  std::uint64_t ctr_ = 0;
};

}  // namespace dkde

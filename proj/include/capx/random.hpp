#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "capx/linalg.hpp"

namespace capx {

// SplitMix64 finalizer.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Counter-based generator: draw i is mix64(key + i * golden). Any draw can be
// recomputed from (key, i) alone, so streams are reproducible across platforms.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() { return at(counter_++); }
  std::uint64_t at(std::uint64_t i) const { return mix64(key_ + (i + 1) * 0x9E3779B97F4A7C15ULL); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  // +1 or -1 with equal probability.
  double sign() { return (next_u64() >> 63) ? 1.0 : -1.0; }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Key of the named stream (experiment, purpose) under a master seed:
// mix64(mix64(seed) ^ fnv1a64(experiment + "/" + purpose)).
inline std::uint64_t stream_key(std::uint64_t seed, std::string_view experiment, std::string_view purpose) {
  std::string name(experiment);
  name += '/';
  name += purpose;
  return mix64(mix64(seed) ^ fnv1a64(name));
}

inline CounterRng make_stream(std::uint64_t seed, std::string_view experiment, std::string_view purpose) {
  return CounterRng(stream_key(seed, experiment, purpose));
}

// Van der Corput radical inverse of i in the given base.
inline double radical_inverse(std::uint64_t i, unsigned base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

// Point i (i >= 1) of the Halton sequence in [0,1)^d.
inline Vector halton_point(std::uint64_t i, Index d) {
  static constexpr unsigned primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41,
                                        43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101};
  constexpr Index np = sizeof(primes) / sizeof(primes[0]);
  Vector p(d);
  for (Index j = 0; j < d; ++j) {
    double r = radical_inverse(i, primes[j % np]);
    if (j >= np) {  // reuse bases with a fixed rotation per extra dimension
      r += static_cast<double>(mix64(static_cast<std::uint64_t>(j)) >> 11) * 0x1.0p-53;
      r -= std::floor(r);
    }
    p(j) = r;
  }
  return p;
}

}  // namespace capx

#pragma once

#include <cmath>
#include <cstdint>

namespace df {

// splitmix64 finalizer (Steele, Lea & Flood 2014). All derived seeds and
// counter-based draws in the project reduce to chains of this mixer, so a
// (seed, label...) key always yields the same stream regardless of
// evaluation order. Constants: 0x9E3779B97F4A7C15 (increment),
// 0xBF58476D1CE4E5B9 / 0x94D049BB133111EB (finalizer multipliers).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(a) ^ (b + 0x9E3779B97F4A7C15ULL));
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix_seed(mix_seed(a, b), c);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                              std::uint64_t d) {
  return mix_seed(mix_seed(a, b, c), d);
}

// Uniform in [0, 1). 53 mantissa bits.
inline double u64_to_unit(std::uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

// Small stateful generator: a splitmix64 counter stream. Cheap to fork,
// trivially reproducible.
class Prng {
 public:
  explicit Prng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_++); }

  // [0, 1)
  double uniform() { return u64_to_unit(next_u64()); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive range.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(uniform() * static_cast<double>(hi - lo + 1));
  }

  // Box-Muller, no cached spare: two draws per call, fully stateless per pair.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  Prng fork(std::uint64_t label) { return Prng(mix_seed(next_u64(), label)); }

 private:
  std::uint64_t state_;
};

// Counter-based draws keyed by (seed, labels...). Used where streams must be
// independent of evaluation order and of each other (corruption stages,
// per-frame seeds, per-step training noise).
inline double counter_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return u64_to_unit(mix_seed(seed, a, b));
}

inline double counter_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                              std::uint64_t c) {
  return u64_to_unit(mix_seed(seed, a, b, c));
}

inline double counter_normal(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  double u1 = u64_to_unit(mix_seed(seed, a, b, 0));
  double u2 = u64_to_unit(mix_seed(seed, a, b, 1));
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

}  // namespace df

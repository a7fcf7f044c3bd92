#pragma once

#include <cmath>
#include <cstdint>

namespace ehub {

// Counter-based pseudo-random streams. A draw is a pure function of
// (seed, stream ids, counter), so results do not depend on evaluation
// order or on how work is split across threads.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_key(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t k = splitmix64(seed ^ 0x8f1bbcdcbfa53e0bULL);
  k = splitmix64(k ^ a);
  k = splitmix64(k ^ b);
  k = splitmix64(k ^ c);
  return k;
}

// Uniform in the open interval (0, 1).
inline double u64_to_unit(std::uint64_t x) {
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  static CounterRng for_stream(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
                               std::uint64_t c = 0) {
    return CounterRng(mix_key(seed, a, b, c));
  }

  std::uint64_t next_u64() { return splitmix64(key_ + 0x9e3779b97f4a7c15ULL * (++counter_)); }

  double next_unit() { return u64_to_unit(next_u64()); }

  // Box-Muller; consumes two uniforms per call.
  double next_gaussian() {
    const double u1 = next_unit();
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// One Gaussian addressed by (seed, a, b, c); used for per-(scenario, step,
// chain) demand draws.
inline double gaussian_at(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  const std::uint64_t key = mix_key(seed, a, b, c);
  const double u1 = u64_to_unit(splitmix64(key + 0x9e3779b97f4a7c15ULL));
  const double u2 = u64_to_unit(splitmix64(key + 0x2545f4914f6cdd1dULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

} // namespace ehub

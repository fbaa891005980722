#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace paint {

// Deterministic RNG: mt19937_64 core with explicit float derivations so the
// stream is identical across platforms/compilers (std::distributions are not).
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0,1): 53-bit mantissa construction.
  double uniform() { return (double)(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  float uniform_f() { return (float)uniform(); }

  // Integer in [0, n). Rejection-free modulo is fine for our n << 2^64 uses,
  // but use rejection sampling anyway for exact uniformity.
  uint64_t uniform_int(uint64_t n) {
    if (n == 0) return 0;
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  // Box-Muller; caches the second variate.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586477 * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Independent child stream: splitmix64 of (state sample, tag) so siblings
  // with different tags never collide.
  Rng child(uint64_t tag) {
    uint64_t x = gen_() + 0x9E3779B97F4A7C15ull * (tag + 1);
    x = splitmix64(x);
    return Rng(x);
  }

  static uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

 private:
  std::mt19937_64 gen_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace paint

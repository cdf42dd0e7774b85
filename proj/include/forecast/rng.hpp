#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace forecast {

// Deterministic RNG with fixed mapping functions. std::mt19937_64 produces a
// portable bit stream, but the standard distributions do not; the mappings
// here are pinned so runs reproduce bit-for-bit across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) via 128-bit multiply-shift with rejection.
  std::uint64_t bounded(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t threshold = (~n + 1) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t x = engine_();
      const auto wide = static_cast<unsigned __int128>(x) * n;
      if (static_cast<std::uint64_t>(wide) >= threshold) {
        return static_cast<std::uint64_t>(wide >> 64);
      }
    }
  }

  // Standard normal via Box-Muller (one value per call, no caching).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Fisher-Yates with the pinned bounded() mapping.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Independent child stream; `salt` separates usage sites.
  Rng fork(std::uint64_t salt) {
    return Rng(next_u64() ^ (salt * 0x9e3779b97f4a7c15ULL));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace forecast

#pragma once

#include <cmath>

#include "forecast/graph.hpp"
#include "forecast/models/common.hpp"
#include "forecast/pipeline.hpp"
#include "forecast/rng.hpp"

namespace forecast::test {

// Small synthetic sample with smooth curved motion, normalized-ish values.
inline models::Sample make_sample(std::size_t H, std::size_t P, std::size_t N,
                                  Rng& rng, std::size_t target = 0) {
  models::Sample s;
  s.history_norm = Tensor({H, N, 4});
  s.target = target;
  for (std::size_t o = 0; o < N; ++o) {
    const double phase = rng.uniform(0, 6.28);
    const double r = rng.uniform(0.5, 1.5);
    for (std::size_t t = 0; t < H; ++t) {
      const double a = phase + 0.1 * static_cast<double>(t);
      s.history_norm(t, o, 0) = r * std::cos(a);
      s.history_norm(t, o, 1) = r * std::sin(a);
      s.history_norm(t, o, 2) = -r * std::sin(a) * 0.1 / 0.04;
      s.history_norm(t, o, 3) = r * std::cos(a) * 0.1 / 0.04;
    }
  }
  s.target_pos_norm = Tensor({P, 2});
  s.target_vel_norm = Tensor({P, 2});
  s.target_pos_m = Tensor({P, 2});
  for (std::size_t t = 0; t < P; ++t) {
    for (std::size_t c = 0; c < 2; ++c) {
      s.target_pos_norm(t, c) = rng.uniform(-1, 1);
      s.target_vel_norm(t, c) = rng.uniform(-1, 1);
      s.target_pos_m(t, c) = rng.uniform(0, 20);
    }
  }
  s.context = Tensor({H, 8});
  for (std::size_t t = 0; t < H; ++t) {
    s.context(t, 0) = s.history_norm(t, target, 2);
    s.context(t, 1) = s.history_norm(t, target, 3);
    for (std::size_t f = 2; f < 8; ++f) {
      s.context(t, f) = data::distance_transform(rng.uniform(-10, 10));
    }
  }
  for (std::size_t a = 0; a < N; ++a) {
    for (std::size_t b = 0; b < N; ++b) {
      if (a != b) {
        s.graph.edges.emplace_back(static_cast<int>(a), static_cast<int>(b));
      }
    }
  }
  s.last_pos_m = {10.0, 7.0};
  s.last_vel_m = {1.0, -0.5};
  return s;
}

inline data::NormStats unit_stats() {
  data::NormStats stats;
  stats.feature_names = {"pos_x", "pos_y", "v_x", "v_y"};
  stats.mean = {0.0, 0.0, 0.0, 0.0};
  stats.stddev = {1.0, 1.0, 1.0, 1.0};
  return stats;
}

}  // namespace forecast::test

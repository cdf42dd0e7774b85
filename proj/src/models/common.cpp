#include "forecast/models/common.hpp"

#include <cmath>

#include "forecast/errors.hpp"
#include "forecast/metrics.hpp"

namespace forecast::models {

Tensor init_weight(Shape shape, std::size_t fan_in, Rng& rng) {
  if (fan_in == 0) throw ParameterError("init_weight: fan_in must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = rng.uniform(-bound, bound);
  }
  return t;
}

Parameter make_weight(std::string name, Shape shape, std::size_t fan_in,
                      Rng& rng) {
  return Parameter{std::move(name), init_weight(std::move(shape), fan_in, rng)};
}

Parameter make_bias(std::string name, std::size_t width) {
  return Parameter{std::move(name), Tensor::zeros({width})};
}

const Tensor& Forecaster::native_target(const Sample& sample) const {
  return output() == OutputKind::kVelocities ? sample.target_vel_norm
                                             : sample.target_pos_norm;
}

Tensor Forecaster::predict_positions_m(const Sample& sample,
                                       const data::NormStats& stats) {
  Tape tape;
  Binder binder(tape, /*with_grad=*/false);
  Var out = predict(binder, sample, /*training=*/false, nullptr);
  if (output() == OutputKind::kVelocities) {
    Tensor vel = denorm_pair(out.value(), stats, sample.ch_vx, sample.ch_vy);
    return eval::integrate_velocities(sample.last_pos_m, vel, sample.dt);
  }
  return denorm_pair(out.value(), stats, sample.ch_px, sample.ch_py);
}

std::size_t Forecaster::parameter_count() {
  std::size_t n = 0;
  for (const Parameter* p : parameters()) n += p->value.size();
  return n;
}

Tensor denorm_pair(const Tensor& pair, const data::NormStats& stats,
                   std::size_t ch_x, std::size_t ch_y) {
  if (pair.rank() != 2 || pair.dim(1) != 2) {
    throw DimensionError("denorm_pair: expected [P x 2], got " +
                         shape_str(pair.shape()));
  }
  Tensor out = pair;
  for (std::size_t t = 0; t < out.dim(0); ++t) {
    out(t, 0) = stats.invert_one(out(t, 0), ch_x);
    out(t, 1) = stats.invert_one(out(t, 1), ch_y);
  }
  return out;
}

Tensor scene_feature_rows(const Tensor& history, std::size_t ch_x,
                          std::size_t ch_y) {
  const std::size_t H = history.dim(0), N = history.dim(1);
  Tensor out({H, 2 * N});
  for (std::size_t t = 0; t < H; ++t) {
    for (std::size_t o = 0; o < N; ++o) {
      out(t, 2 * o) = history(t, o, ch_x);
      out(t, 2 * o + 1) = history(t, o, ch_y);
    }
  }
  return out;
}

Tensor scene_pos_vel_rows(const Tensor& history, const Sample& s) {
  const std::size_t H = history.dim(0), N = history.dim(1);
  Tensor out({H, 4 * N});
  for (std::size_t t = 0; t < H; ++t) {
    for (std::size_t o = 0; o < N; ++o) {
      out(t, 4 * o) = history(t, o, s.ch_px);
      out(t, 4 * o + 1) = history(t, o, s.ch_py);
      out(t, 4 * o + 2) = history(t, o, s.ch_vx);
      out(t, 4 * o + 3) = history(t, o, s.ch_vy);
    }
  }
  return out;
}

}  // namespace forecast::models

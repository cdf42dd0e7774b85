#include "forecast/models/baseline.hpp"

#include "forecast/errors.hpp"

namespace forecast::models {

Tensor constant_velocity_forecast(const std::array<double, 2>& p_last,
                                  const std::array<double, 2>& v_last,
                                  std::size_t forecast_steps, double dt) {
  Tensor out({forecast_steps, 2});
  for (std::size_t i = 0; i < forecast_steps; ++i) {
    const double step = static_cast<double>(i + 1) * dt;
    out(i, 0) = p_last[0] + step * v_last[0];
    out(i, 1) = p_last[1] + step * v_last[1];
  }
  return out;
}

Var ConstantVelocityModel::predict(Binder&, const Sample&, bool, Rng*) {
  throw ContractError("constant_velocity is training-free; evaluate via "
                      "predict_positions_m");
}

Tensor ConstantVelocityModel::predict_positions_m(const Sample& sample,
                                                  const data::NormStats&) {
  return constant_velocity_forecast(sample.last_pos_m, sample.last_vel_m,
                                    sample.forecast_steps(), sample.dt);
}

// ---- Linear ----

LinearModel::LinearModel(LinearConfig config, Rng& rng)
    : Forecaster("linear"),
      config_(config),
      w1_(make_weight("linear.w1", {config.hidden, config.input_width()},
                      config.input_width(), rng)),
      b1_(make_bias("linear.b1", config.hidden)),
      w2_(make_weight("linear.w2", {config.output_width(), config.hidden},
                      config.hidden, rng)),
      b2_(make_bias("linear.b2", config.output_width())) {}

std::vector<Parameter*> LinearModel::parameters() {
  return {&w1_, &b1_, &w2_, &b2_};
}

Var LinearModel::predict(Binder& binder, const Sample& sample, bool training,
                         Rng* dropout_rng) {
  Tape& tape = binder.tape();
  // Flattening order is time-major, then object, then (v_x, v_y).
  Tensor vel = scene_feature_rows(sample.history_norm, sample.ch_vx,
                                  sample.ch_vy);
  if (vel.size() != config_.input_width()) {
    throw DimensionError("linear: input width " + std::to_string(vel.size()) +
                         " does not match configured " +
                         std::to_string(config_.input_width()));
  }
  Var x = tape.constant(Tensor({vel.size()}, vel.raw()));
  Var h = relu(add(matvec(binder(w1_), x), binder(b1_)));
  if (training && dropout_rng) {
    h = ad::dropout(h, config_.dropout, *dropout_rng, true);
  }
  Var y = add(matvec(binder(w2_), h), binder(b2_));
  return reshape(y, {config_.forecast_steps, 2});
}

// ---- TCNN ----

TcnnModel::TcnnModel(TcnnConfig config, Rng& rng)
    : Forecaster("tcnn"), config_(std::move(config)) {
  std::size_t c_in = config_.input_channels;
  for (std::size_t l = 0; l < config_.dilations.size(); ++l) {
    Layer layer;
    const std::string prefix = "tcnn.layer" + std::to_string(l);
    const std::size_t fan_in = config_.kernel * c_in;
    layer.direction = make_weight(
        prefix + ".v", {config_.kernel, c_in, config_.filters}, fan_in, rng);
    layer.scale =
        Parameter{prefix + ".g", Tensor::full({config_.filters}, 1.0)};
    layer.bias = make_bias(prefix + ".bias", config_.filters);
    if (c_in != config_.filters) {
      layer.has_projection = true;
      layer.projection = make_weight(prefix + ".proj",
                                     {c_in, config_.filters}, c_in, rng);
    }
    layers_.push_back(std::move(layer));
    c_in = config_.filters;
  }
  const std::size_t out = config_.forecast_steps * 2;
  head_w_ = make_weight("tcnn.head.w", {out, config_.filters},
                        config_.filters, rng);
  head_b_ = make_bias("tcnn.head.b", out);
}

std::vector<Parameter*> TcnnModel::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : layers_) {
    out.push_back(&l.direction);
    out.push_back(&l.scale);
    out.push_back(&l.bias);
    if (l.has_projection) out.push_back(&l.projection);
  }
  out.push_back(&head_w_);
  out.push_back(&head_b_);
  return out;
}

Var TcnnModel::forward_features(Binder& binder, Var input) {
  Var y = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Layer& layer = layers_[l];
    Var kernel = weight_norm(binder(layer.direction), binder(layer.scale));
    Var conv = causal_conv1d(y, kernel, config_.dilations[l]);
    Var h = relu(add_rowwise(conv, binder(layer.bias)));
    Var res = layer.has_projection ? matmul(y, binder(layer.projection)) : y;
    y = add(h, res);
  }
  return y;
}

Var TcnnModel::predict(Binder& binder, const Sample& sample, bool, Rng*) {
  Tape& tape = binder.tape();
  Tensor vel = scene_feature_rows(sample.history_norm, sample.ch_vx,
                                  sample.ch_vy);
  if (vel.dim(1) != config_.input_channels) {
    throw DimensionError("tcnn: channel width " + std::to_string(vel.dim(1)) +
                         " does not match configured " +
                         std::to_string(config_.input_channels));
  }
  Var x = tape.constant(std::move(vel));
  Var features = forward_features(binder, x);
  Var last = row(features, features.value().dim(0) - 1);
  Var y = add(matvec(binder(head_w_), last), binder(head_b_));
  return reshape(y, {config_.forecast_steps, 2});
}

}  // namespace forecast::models

#pragma once

#include "forecast/models/common.hpp"

namespace forecast::models {

// p[i] = p_last + i * dt * v_last, i = 1..P.
Tensor constant_velocity_forecast(const std::array<double, 2>& p_last,
                                  const std::array<double, 2>& v_last,
                                  std::size_t forecast_steps,
                                  double dt = data::kFrameDt);

// Training-free extrapolation of the last observed velocity; evaluated
// directly in meters.
class ConstantVelocityModel final : public Forecaster {
 public:
  ConstantVelocityModel() : Forecaster("constant_velocity") {}
  bool trainable() const override { return false; }
  OutputKind output() const override { return OutputKind::kPositions; }
  std::vector<Parameter*> parameters() override { return {}; }
  Var predict(Binder& binder, const Sample& sample, bool training,
              Rng* dropout_rng) override;
  Tensor predict_positions_m(const Sample& sample,
                             const data::NormStats& stats) override;
};

struct LinearConfig {
  std::size_t history_steps = 50;
  std::size_t objects = 11;
  std::size_t forecast_steps = 50;
  std::size_t hidden = 128;
  double dropout = 0.1;

  std::size_t input_width() const { return history_steps * objects * 2; }
  std::size_t output_width() const { return forecast_steps * 2; }
};

// Two dense layers over the flattened velocity history.
class LinearModel final : public Forecaster {
 public:
  LinearModel(LinearConfig config, Rng& rng);
  OutputKind output() const override { return OutputKind::kVelocities; }
  std::vector<Parameter*> parameters() override;
  Var predict(Binder& binder, const Sample& sample, bool training,
              Rng* dropout_rng) override;

  const LinearConfig& config() const { return config_; }

 private:
  LinearConfig config_;
  Parameter w1_, b1_, w2_, b2_;
};

struct TcnnConfig {
  std::size_t input_channels = 22;
  std::size_t forecast_steps = 50;
  std::size_t filters = 42;
  std::size_t kernel = 2;
  std::vector<std::size_t> dilations = {1, 2, 4, 8, 8};
};

// Dilated causal convolution stack with weight normalization, ReLU and
// residual connections; a linear head reads the last timestep.
class TcnnModel final : public Forecaster {
 public:
  TcnnModel(TcnnConfig config, Rng& rng);
  OutputKind output() const override { return OutputKind::kVelocities; }
  std::vector<Parameter*> parameters() override;
  Var predict(Binder& binder, const Sample& sample, bool training,
              Rng* dropout_rng) override;

  // Shared by predict() and the causality tests.
  Var forward_features(Binder& binder, Var input);  // [T x filters]

  const TcnnConfig& config() const { return config_; }

 private:
  struct Layer {
    Parameter direction;  // [k x c_in x c_out]
    Parameter scale;      // [c_out]
    Parameter bias;       // [c_out]
    bool has_projection = false;
    Parameter projection;  // [c_in x c_out] when channel width changes
  };
  TcnnConfig config_;
  std::vector<Layer> layers_;
  Parameter head_w_, head_b_;
};

}  // namespace forecast::models

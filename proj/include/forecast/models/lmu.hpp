#pragma once

#include "forecast/models/common.hpp"

namespace forecast::models {

// State-space matrices encoding Legendre polynomial coefficients:
//   a_ij = -1 if i < j, else (-1)^(i-j+1);  b_i = (2i+1) (-1)^i.
// `row_scaled` multiplies row i of A by (2i+1), the original LMU variant;
// the default follows the printed form.
std::pair<Tensor, Tensor> lmu_matrices(std::size_t d, bool row_scaled = false);

enum class Discretization { kEuler, kZoh };

Discretization discretization_from_string(const std::string& name);

// Euler: A' = I + (dt/theta) A, B' = (dt/theta) B.
// ZOH:   A' = exp((dt/theta) A), B' = A^-1 (A' - I) B, computed through the
// exponential of the augmented matrix [[A, B], [0, 0]] (no explicit inverse).
std::pair<Tensor, Tensor> discretize(const Tensor& a, const Tensor& b,
                                     double theta, Discretization method,
                                     double dt = 1.0);

// Dense matrix exponential (Pade-13 scaling and squaring).
Tensor expm(const Tensor& m);

struct LmuState {
  Var h;
  Var m;
};

struct LmuLayerVars {
  Var e_x, e_h, e_m;  // encoding vectors
  Var w_x, w_h, w_m;  // hidden-state weights
  Var a_bar, b_bar;   // fixed discretized matrices (constants on the tape)
};

// u = e_x.x + e_h.h + e_m.m;  m' = A'm + B'u;  h' = tanh(Wx x + Wh h + Wm m')
LmuState lmu_cell(const LmuLayerVars& layer, Var x, const LmuState& prev);

enum class LmuInput { kPositions, kVelocities };

struct LmuConfig {
  std::size_t input_width = 22;
  std::size_t memory_order = 256;  // d
  std::size_t hidden = 256;
  double theta = 25.0;  // window length in samples
  std::size_t layers = 2;
  double dropout = 0.1;
  std::size_t forecast_steps = 50;
  Discretization method = Discretization::kZoh;
  bool row_scaled_a = false;
  LmuInput input = LmuInput::kPositions;
};

class LmuModel final : public Forecaster {
 public:
  LmuModel(LmuConfig config, Rng& rng);
  OutputKind output() const override { return OutputKind::kPositions; }
  std::vector<Parameter*> parameters() override;
  Var predict(Binder& binder, const Sample& sample, bool training,
              Rng* dropout_rng) override;

  Var forward_rows(Binder& binder, const Tensor& rows, bool training,
                   Rng* dropout_rng);

  const LmuConfig& config() const { return config_; }
  const Tensor& a_bar() const { return a_bar_; }
  const Tensor& b_bar() const { return b_bar_; }

 private:
  struct Layer {
    Parameter e_x, e_h, e_m;
    Parameter w_x, w_h, w_m;
  };

  LmuConfig config_;
  Tensor a_bar_;  // [d x d], fixed
  Tensor b_bar_;  // [d]
  std::vector<Layer> layers_;
  Parameter head_w_, head_b_;
};

}  // namespace forecast::models

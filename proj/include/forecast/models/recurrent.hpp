#pragma once

#include "forecast/models/common.hpp"

namespace forecast::models {

// One LSTM layer's parameters: four gates, each with input/hidden weights
// and both bias vectors.
struct LstmLayerParams {
  Parameter w_ii, b_ii, w_hi, b_hi;  // input gate
  Parameter w_if, b_if, w_hf, b_hf;  // forget gate
  Parameter w_ig, b_ig, w_hg, b_hg;  // cell candidate
  Parameter w_io, b_io, w_ho, b_ho;  // output gate

  static LstmLayerParams create(const std::string& prefix, std::size_t input,
                                std::size_t hidden, Rng& rng);
  void collect(std::vector<Parameter*>& out);
};

struct LstmState {
  Var h;
  Var c;
};

// Bound gate weights for one layer on the active tape.
struct LstmLayerVars {
  Var w_ii, b_ii, w_hi, b_hi;
  Var w_if, b_if, w_hf, b_hf;
  Var w_ig, b_ig, w_hg, b_hg;
  Var w_io, b_io, w_ho, b_ho;

  static LstmLayerVars bind(Binder& binder, LstmLayerParams& p);
};

// i = sigmoid(W_ii x + b_ii + W_hi h + b_hi)
// f = sigmoid(W_if x + b_if + W_hf h + b_hf)
// g = tanh  (W_ig x + b_ig + W_hg h + b_hg)
// o = sigmoid(W_io x + b_io + W_ho h + b_ho)
// c' = f * c + i * g;  h' = o * tanh(c')
LstmState lstm_cell(const LstmLayerVars& layer, Var x, const LstmState& prev);

// Runs a stack of LSTM layers over [T x input] rows; returns the final
// hidden state of the last layer. When `states_io` is non-null it supplies
// the initial per-layer states and receives the final ones, so a sequence
// may be streamed in chunks.
Var lstm_run(std::vector<LstmLayerVars>& layers, Var input_rows,
             std::size_t hidden, Tape& tape,
             std::vector<LstmState>* states_io = nullptr);

struct LstmConfig {
  std::size_t input_width = 22;
  std::size_t hidden = 128;
  std::size_t layers = 2;
  std::size_t forecast_steps = 50;
};

// Two stacked LSTM layers over the velocity history; the final hidden state
// maps to all P steps at once.
class LstmModel final : public Forecaster {
 public:
  LstmModel(LstmConfig config, Rng& rng);
  OutputKind output() const override { return OutputKind::kVelocities; }
  std::vector<Parameter*> parameters() override;
  Var predict(Binder& binder, const Sample& sample, bool training,
              Rng* dropout_rng) override;

  // Forward over an explicit [T x input] feature matrix (streaming tests).
  Var forward_rows(Binder& binder, const Tensor& rows);

  const LstmConfig& config() const { return config_; }

 private:
  LstmConfig config_;
  std::vector<LstmLayerParams> layers_;
  Parameter head_w_, head_b_;
};

struct CnnLstmConfig {
  std::size_t history_steps = 50;
  std::size_t forecast_steps = 50;
  std::size_t conv_channels = 8;
  std::size_t kernel_time = 5;  // the (2 x 5) kernel spans (x,y) x time
  double leaky_slope = 0.1;
  std::size_t hidden = 128;
  std::size_t lstm_layers = 2;
  bool predict_positions = true;  // config switch: positions or velocities

  std::size_t encoding_width() const { return forecast_steps * 2; }
};

// Four information fields (velocity, nearest-object distance, hoop-1
// distance, hoop-2 distance), each running conv -> leaky ReLU -> LSTM ->
// linear encoder; the four encodings fuse through the context head.
class CnnLstmModel final : public Forecaster {
 public:
  static constexpr std::size_t kFields = 4;
  static const std::array<const char*, kFields> kFieldNames;

  CnnLstmModel(CnnLstmConfig config, Rng& rng);
  OutputKind output() const override {
    return config_.predict_positions ? OutputKind::kPositions
                                     : OutputKind::kVelocities;
  }
  std::vector<Parameter*> parameters() override;
  Var predict(Binder& binder, const Sample& sample, bool training,
              Rng* dropout_rng) override;

  const CnnLstmConfig& config() const { return config_; }

 private:
  struct FieldBlock {
    Parameter kernel;  // [c_out x 1 x 2 x kernel_time]
    Parameter conv_bias;
    std::vector<LstmLayerParams> lstm;
    Parameter enc_w, enc_b;  // hidden -> P*2
  };

  Var encode_field(Binder& binder, FieldBlock& block, const Tensor& field);

  CnnLstmConfig config_;
  std::array<FieldBlock, kFields> fields_;
  Parameter head_w_, head_b_;  // 4*P*2 -> P*2
};

}  // namespace forecast::models

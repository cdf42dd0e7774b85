#pragma once

#include "forecast/models/common.hpp"

namespace forecast::models {

enum class Pooling { kLastStep, kMean };

struct TransformerConfig {
  std::size_t input_width = 44;  // 11 objects x (pos, vel)
  std::size_t d_model = 256;
  std::size_t heads = 8;
  std::size_t head_dim = 32;  // Q/K width; set 4 to force the printed d_k
  std::size_t ffn_hidden = 1024;
  std::size_t blocks = 6;
  std::size_t embed_kernel = 3;
  std::size_t forecast_steps = 50;
  Pooling pooling = Pooling::kLastStep;
  bool sinusoidal_encoding = false;  // optional additive positional signal
  double layer_norm_eps = 1e-5;
};

struct EncoderBlockParams {
  std::vector<Parameter> w_q, w_k, w_v;  // per head
  std::vector<Parameter> w_o;            // per head [v_dim x d_model]
  Parameter b_o;
  Parameter ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  Parameter ln1_gain, ln1_bias, ln2_gain, ln2_bias;
};

// Encoder-only transformer over a CNN-embedded history; a one-shot linear
// head maps the pooled representation to all P steps.
class TransformerModel final : public Forecaster {
 public:
  TransformerModel(TransformerConfig config, Rng& rng);
  OutputKind output() const override { return OutputKind::kPositions; }
  std::vector<Parameter*> parameters() override;
  Var predict(Binder& binder, const Sample& sample, bool training,
              Rng* dropout_rng) override;

  // Stage helpers (also used by tests).
  Var temporal_embed(Binder& binder, Var history_rows);     // [H x d_model]
  Var mha(Binder& binder, std::size_t block, Var x);        // [H x d_model]
  Var ffn(Binder& binder, std::size_t block, Var x);        // [H x d_model]
  Var encoder_block(Binder& binder, std::size_t block, Var x);
  Var forward_rows(Binder& binder, const Tensor& rows);     // [P x 2]

  const TransformerConfig& config() const { return config_; }

 private:
  TransformerConfig config_;
  Parameter embed_kernel_, embed_bias_;
  std::vector<EncoderBlockParams> blocks_;
  Parameter head_w_, head_b_;

  std::size_t v_dim_ = 0;  // per-head value width, d_model / heads
};

// Sinusoidal positional encoding table [T x d].
Tensor sinusoidal_encoding(std::size_t steps, std::size_t d_model);

}  // namespace forecast::models

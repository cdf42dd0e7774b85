#include "forecast/models/transformer.hpp"

#include <cmath>

#include "forecast/errors.hpp"

namespace forecast::models {

Tensor sinusoidal_encoding(std::size_t steps, std::size_t d_model) {
  Tensor out({steps, d_model});
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < d_model; ++i) {
      const double exponent =
          static_cast<double>(2 * (i / 2)) / static_cast<double>(d_model);
      const double rate = std::pow(10000.0, exponent);
      const double arg = static_cast<double>(t) / rate;
      out(t, i) = i % 2 == 0 ? std::sin(arg) : std::cos(arg);
    }
  }
  return out;
}

TransformerModel::TransformerModel(TransformerConfig config, Rng& rng)
    : Forecaster("transformer"), config_(config) {
  if (config.d_model % config.heads != 0) {
    throw ConfigError("transformer: d_model " + std::to_string(config.d_model) +
                      " is not divisible by " + std::to_string(config.heads) +
                      " heads");
  }
  v_dim_ = config.d_model / config.heads;

  embed_kernel_ = make_weight(
      "transformer.embed.w",
      {config.embed_kernel, config.input_width, config.d_model},
      config.embed_kernel * config.input_width, rng);
  embed_bias_ = make_bias("transformer.embed.b", config.d_model);

  for (std::size_t b = 0; b < config.blocks; ++b) {
    const std::string prefix = "transformer.block" + std::to_string(b);
    EncoderBlockParams block;
    for (std::size_t h = 0; h < config.heads; ++h) {
      const std::string hp = prefix + ".head" + std::to_string(h);
      block.w_q.push_back(make_weight(hp + ".w_q",
                                      {config.d_model, config.head_dim},
                                      config.d_model, rng));
      block.w_k.push_back(make_weight(hp + ".w_k",
                                      {config.d_model, config.head_dim},
                                      config.d_model, rng));
      block.w_v.push_back(make_weight(hp + ".w_v", {config.d_model, v_dim_},
                                      config.d_model, rng));
      block.w_o.push_back(make_weight(hp + ".w_o", {v_dim_, config.d_model},
                                      config.d_model, rng));
    }
    block.b_o = make_bias(prefix + ".b_o", config.d_model);
    block.ffn_w1 = make_weight(prefix + ".ffn.w1",
                               {config.d_model, config.ffn_hidden},
                               config.d_model, rng);
    block.ffn_b1 = make_bias(prefix + ".ffn.b1", config.ffn_hidden);
    block.ffn_w2 = make_weight(prefix + ".ffn.w2",
                               {config.ffn_hidden, config.d_model},
                               config.ffn_hidden, rng);
    block.ffn_b2 = make_bias(prefix + ".ffn.b2", config.d_model);
    block.ln1_gain = Parameter{prefix + ".ln1.gain",
                               Tensor::full({config.d_model}, 1.0)};
    block.ln1_bias = make_bias(prefix + ".ln1.bias", config.d_model);
    block.ln2_gain = Parameter{prefix + ".ln2.gain",
                               Tensor::full({config.d_model}, 1.0)};
    block.ln2_bias = make_bias(prefix + ".ln2.bias", config.d_model);
    blocks_.push_back(std::move(block));
  }

  const std::size_t out = config.forecast_steps * 2;
  head_w_ = make_weight("transformer.head.w", {out, config.d_model},
                        config.d_model, rng);
  head_b_ = make_bias("transformer.head.b", out);
}

std::vector<Parameter*> TransformerModel::parameters() {
  std::vector<Parameter*> out{&embed_kernel_, &embed_bias_};
  for (auto& b : blocks_) {
    for (std::size_t h = 0; h < config_.heads; ++h) {
      out.push_back(&b.w_q[h]);
      out.push_back(&b.w_k[h]);
      out.push_back(&b.w_v[h]);
      out.push_back(&b.w_o[h]);
    }
    for (Parameter* p : {&b.b_o, &b.ffn_w1, &b.ffn_b1, &b.ffn_w2, &b.ffn_b2,
                         &b.ln1_gain, &b.ln1_bias, &b.ln2_gain, &b.ln2_bias}) {
      out.push_back(p);
    }
  }
  out.push_back(&head_w_);
  out.push_back(&head_b_);
  return out;
}

Var TransformerModel::temporal_embed(Binder& binder, Var history_rows) {
  if (history_rows.value().dim(1) != config_.input_width) {
    throw DimensionError("transformer: feature width " +
                         std::to_string(history_rows.value().dim(1)) +
                         " does not match configured " +
                         std::to_string(config_.input_width));
  }
  Var embedded = add_rowwise(
      causal_conv1d(history_rows, binder(embed_kernel_), 1),
      binder(embed_bias_));
  if (config_.sinusoidal_encoding) {
    Tape& tape = binder.tape();
    const std::size_t H = history_rows.value().dim(0);
    embedded = add(embedded,
                   tape.constant(sinusoidal_encoding(H, config_.d_model)));
  }
  return embedded;
}

Var TransformerModel::mha(Binder& binder, std::size_t block, Var x) {
  EncoderBlockParams& b = blocks_[block];
  const double scale_factor =
      1.0 / std::sqrt(static_cast<double>(config_.head_dim));
  Var out;
  for (std::size_t h = 0; h < config_.heads; ++h) {
    Var q = matmul(x, binder(b.w_q[h]));
    Var k = matmul(x, binder(b.w_k[h]));
    Var v = matmul(x, binder(b.w_v[h]));
    // Full (non-causal) attention over the whole sequence.
    Var scores = scale(matmul(q, transpose(k)), scale_factor);
    Var weights = softmax(scores, 1);
    Var head = matmul(weights, v);
    Var projected = matmul(head, binder(b.w_o[h]));
    out = out.defined() ? add(out, projected) : projected;
  }
  return add_rowwise(out, binder(b.b_o));
}

Var TransformerModel::ffn(Binder& binder, std::size_t block, Var x) {
  EncoderBlockParams& b = blocks_[block];
  Var hidden = relu(add_rowwise(matmul(x, binder(b.ffn_w1)), binder(b.ffn_b1)));
  return add_rowwise(matmul(hidden, binder(b.ffn_w2)), binder(b.ffn_b2));
}

Var TransformerModel::encoder_block(Binder& binder, std::size_t block, Var x) {
  EncoderBlockParams& b = blocks_[block];
  // Post-norm: normalize after each residual sum.
  Var attn = layer_norm(add(x, mha(binder, block, x)), binder(b.ln1_gain),
                        binder(b.ln1_bias), config_.layer_norm_eps);
  return layer_norm(add(attn, ffn(binder, block, attn)), binder(b.ln2_gain),
                    binder(b.ln2_bias), config_.layer_norm_eps);
}

Var TransformerModel::forward_rows(Binder& binder, const Tensor& rows) {
  Tape& tape = binder.tape();
  Var x = temporal_embed(binder, tape.constant(rows));
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    x = encoder_block(binder, b, x);
  }
  Var pooled;
  if (config_.pooling == Pooling::kLastStep) {
    pooled = row(x, rows.dim(0) - 1);
  } else {
    const std::size_t H = rows.dim(0);
    Var sum_rows;
    for (std::size_t t = 0; t < H; ++t) {
      Var r = row(x, t);
      sum_rows = sum_rows.defined() ? add(sum_rows, r) : r;
    }
    pooled = scale(sum_rows, 1.0 / static_cast<double>(H));
  }
  Var y = add(matvec(binder(head_w_), pooled), binder(head_b_));
  return reshape(y, {config_.forecast_steps, 2});
}

Var TransformerModel::predict(Binder& binder, const Sample& sample, bool,
                              Rng*) {
  Tensor rows = scene_pos_vel_rows(sample.history_norm, sample);
  return forward_rows(binder, rows);
}

}  // namespace forecast::models

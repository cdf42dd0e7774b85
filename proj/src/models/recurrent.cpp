#include "forecast/models/recurrent.hpp"

#include "forecast/errors.hpp"

namespace forecast::models {

LstmLayerParams LstmLayerParams::create(const std::string& prefix,
                                        std::size_t input, std::size_t hidden,
                                        Rng& rng) {
  auto w_in = [&](const char* gate) {
    return make_weight(prefix + ".w_i" + gate, {hidden, input}, input, rng);
  };
  auto w_hid = [&](const char* gate) {
    return make_weight(prefix + ".w_h" + gate, {hidden, hidden}, hidden, rng);
  };
  auto b_in = [&](const char* gate) {
    return make_bias(prefix + ".b_i" + gate, hidden);
  };
  auto b_hid = [&](const char* gate) {
    return make_bias(prefix + ".b_h" + gate, hidden);
  };
  LstmLayerParams p;
  p.w_ii = w_in("i"); p.b_ii = b_in("i"); p.w_hi = w_hid("i"); p.b_hi = b_hid("i");
  p.w_if = w_in("f"); p.b_if = b_in("f"); p.w_hf = w_hid("f"); p.b_hf = b_hid("f");
  p.w_ig = w_in("g"); p.b_ig = b_in("g"); p.w_hg = w_hid("g"); p.b_hg = b_hid("g");
  p.w_io = w_in("o"); p.b_io = b_in("o"); p.w_ho = w_hid("o"); p.b_ho = b_hid("o");
  return p;
}

void LstmLayerParams::collect(std::vector<Parameter*>& out) {
  for (Parameter* p : {&w_ii, &b_ii, &w_hi, &b_hi, &w_if, &b_if, &w_hf, &b_hf,
                       &w_ig, &b_ig, &w_hg, &b_hg, &w_io, &b_io, &w_ho, &b_ho}) {
    out.push_back(p);
  }
}

LstmLayerVars LstmLayerVars::bind(Binder& binder, LstmLayerParams& p) {
  LstmLayerVars v;
  v.w_ii = binder(p.w_ii); v.b_ii = binder(p.b_ii);
  v.w_hi = binder(p.w_hi); v.b_hi = binder(p.b_hi);
  v.w_if = binder(p.w_if); v.b_if = binder(p.b_if);
  v.w_hf = binder(p.w_hf); v.b_hf = binder(p.b_hf);
  v.w_ig = binder(p.w_ig); v.b_ig = binder(p.b_ig);
  v.w_hg = binder(p.w_hg); v.b_hg = binder(p.b_hg);
  v.w_io = binder(p.w_io); v.b_io = binder(p.b_io);
  v.w_ho = binder(p.w_ho); v.b_ho = binder(p.b_ho);
  return v;
}

LstmState lstm_cell(const LstmLayerVars& l, Var x, const LstmState& prev) {
  auto gate = [&](Var w_i, Var b_i, Var w_h, Var b_h) {
    return add(add(matvec(w_i, x), b_i), add(matvec(w_h, prev.h), b_h));
  };
  Var i = sigmoid(gate(l.w_ii, l.b_ii, l.w_hi, l.b_hi));
  Var f = sigmoid(gate(l.w_if, l.b_if, l.w_hf, l.b_hf));
  Var g = ad::tanh(gate(l.w_ig, l.b_ig, l.w_hg, l.b_hg));
  Var o = sigmoid(gate(l.w_io, l.b_io, l.w_ho, l.b_ho));
  Var c = add(mul(f, prev.c), mul(i, g));
  Var h = mul(o, ad::tanh(c));
  return {h, c};
}

Var lstm_run(std::vector<LstmLayerVars>& layers, Var input_rows,
             std::size_t hidden, Tape& tape,
             std::vector<LstmState>* states_io) {
  const std::size_t T = input_rows.value().dim(0);
  std::vector<LstmState> local(layers.size());
  std::vector<LstmState>& states =
      states_io && !states_io->empty() ? *states_io : local;
  if (&states == &local) {
    for (auto& s : local) {
      s.h = tape.constant(Tensor::zeros({hidden}));
      s.c = tape.constant(Tensor::zeros({hidden}));
    }
  }
  Var last;
  for (std::size_t t = 0; t < T; ++t) {
    Var x = row(input_rows, t);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      states[l] = lstm_cell(layers[l], x, states[l]);
      x = states[l].h;
    }
    last = x;
  }
  if (states_io && states_io->empty()) *states_io = local;
  return last;
}

// ---- LSTM forecaster ----

LstmModel::LstmModel(LstmConfig config, Rng& rng)
    : Forecaster("lstm"), config_(config) {
  std::size_t in = config.input_width;
  for (std::size_t l = 0; l < config.layers; ++l) {
    layers_.push_back(LstmLayerParams::create(
        "lstm.layer" + std::to_string(l), in, config.hidden, rng));
    in = config.hidden;
  }
  const std::size_t out = config.forecast_steps * 2;
  head_w_ = make_weight("lstm.head.w", {out, config.hidden}, config.hidden,
                        rng);
  head_b_ = make_bias("lstm.head.b", out);
}

std::vector<Parameter*> LstmModel::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : layers_) l.collect(out);
  out.push_back(&head_w_);
  out.push_back(&head_b_);
  return out;
}

Var LstmModel::forward_rows(Binder& binder, const Tensor& rows) {
  if (rows.dim(1) != config_.input_width) {
    throw DimensionError("lstm: input width " + std::to_string(rows.dim(1)) +
                         " does not match configured " +
                         std::to_string(config_.input_width));
  }
  Tape& tape = binder.tape();
  std::vector<LstmLayerVars> layers;
  layers.reserve(layers_.size());
  for (auto& l : layers_) layers.push_back(LstmLayerVars::bind(binder, l));
  Var final_h = lstm_run(layers, tape.constant(rows), config_.hidden, tape);
  Var y = add(matvec(binder(head_w_), final_h), binder(head_b_));
  return reshape(y, {config_.forecast_steps, 2});
}

Var LstmModel::predict(Binder& binder, const Sample& sample, bool, Rng*) {
  Tensor vel = scene_feature_rows(sample.history_norm, sample.ch_vx,
                                  sample.ch_vy);
  return forward_rows(binder, vel);
}

// ---- CNN-LSTM ----

const std::array<const char*, CnnLstmModel::kFields> CnnLstmModel::kFieldNames =
    {"velocity", "nearest", "hoop1", "hoop2"};

CnnLstmModel::CnnLstmModel(CnnLstmConfig config, Rng& rng)
    : Forecaster("cnn_lstm"), config_(config) {
  const std::size_t enc = config.encoding_width();
  for (std::size_t f = 0; f < kFields; ++f) {
    FieldBlock& block = fields_[f];
    const std::string prefix =
        "cnn_lstm." + std::string(kFieldNames[f]);
    const std::size_t fan_in = 2 * config.kernel_time;
    block.kernel = make_weight(prefix + ".conv.w",
                               {config.conv_channels, 1, 2, config.kernel_time},
                               fan_in, rng);
    block.conv_bias = make_bias(prefix + ".conv.b", config.conv_channels);
    std::size_t in = config.conv_channels;
    for (std::size_t l = 0; l < config.lstm_layers; ++l) {
      block.lstm.push_back(LstmLayerParams::create(
          prefix + ".lstm" + std::to_string(l), in, config.hidden, rng));
      in = config.hidden;
    }
    block.enc_w = make_weight(prefix + ".enc.w", {enc, config.hidden},
                              config.hidden, rng);
    block.enc_b = make_bias(prefix + ".enc.b", enc);
  }
  head_w_ = make_weight("cnn_lstm.head.w", {enc, kFields * enc}, kFields * enc,
                        rng);
  head_b_ = make_bias("cnn_lstm.head.b", enc);
}

std::vector<Parameter*> CnnLstmModel::parameters() {
  std::vector<Parameter*> out;
  for (auto& f : fields_) {
    out.push_back(&f.kernel);
    out.push_back(&f.conv_bias);
    for (auto& l : f.lstm) l.collect(out);
    out.push_back(&f.enc_w);
    out.push_back(&f.enc_b);
  }
  out.push_back(&head_w_);
  out.push_back(&head_b_);
  return out;
}

Var CnnLstmModel::encode_field(Binder& binder, FieldBlock& block,
                               const Tensor& field) {
  Tape& tape = binder.tape();
  const std::size_t T = field.dim(0);
  if (T < config_.kernel_time) {
    throw ConfigError("cnn_lstm: history of " + std::to_string(T) +
                      " steps is shorter than the conv kernel (" +
                      std::to_string(config_.kernel_time) + ")");
  }
  // Field rows (x, y) become the 2-row image the (2 x kernel_time) kernel
  // sweeps along time.
  Tensor image({1, 2, T});
  for (std::size_t t = 0; t < T; ++t) {
    image(0, 0, t) = field(t, 0);
    image(0, 1, t) = field(t, 1);
  }
  Var conv = conv2d(tape.constant(std::move(image)), binder(block.kernel));
  const std::size_t out_t = T - config_.kernel_time + 1;
  Var rows = transpose(reshape(conv, {config_.conv_channels, out_t}));
  Var activated = leaky_relu(add_rowwise(rows, binder(block.conv_bias)),
                             config_.leaky_slope);
  std::vector<LstmLayerVars> layers;
  for (auto& l : block.lstm) layers.push_back(LstmLayerVars::bind(binder, l));
  Var final_h = lstm_run(layers, activated, config_.hidden, tape);
  return add(matvec(binder(block.enc_w), final_h), binder(block.enc_b));
}

Var CnnLstmModel::predict(Binder& binder, const Sample& sample, bool, Rng*) {
  if (sample.context.size() == 0) {
    throw ConfigError("cnn_lstm: sample has no context features");
  }
  const std::size_t H = sample.history_steps();
  if (sample.context.dim(0) != H || sample.context.dim(1) != 2 * kFields) {
    throw ConfigError("cnn_lstm: context must be [H x 8], got " +
                      shape_str(sample.context.shape()));
  }
  std::vector<Var> encodings;
  for (std::size_t f = 0; f < kFields; ++f) {
    Tensor field({H, 2});
    for (std::size_t t = 0; t < H; ++t) {
      field(t, 0) = sample.context(t, 2 * f);
      field(t, 1) = sample.context(t, 2 * f + 1);
    }
    encodings.push_back(encode_field(binder, fields_[f], field));
  }
  Var fused = concat(encodings);
  Var y = add(matvec(binder(head_w_), fused), binder(head_b_));
  return reshape(y, {config_.forecast_steps, 2});
}

}  // namespace forecast::models

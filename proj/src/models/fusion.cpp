#include "forecast/models/fusion.hpp"

#include <algorithm>

#include "forecast/errors.hpp"

namespace forecast::models {

GatLayerParams GatLayerParams::create(const std::string& prefix,
                                      std::size_t f_in, std::size_t f_out,
                                      std::size_t heads, double slope,
                                      Rng& rng) {
  if (heads == 0) throw ParameterError("gat: need at least one head");
  GatLayerParams p;
  p.heads = heads;
  p.leaky_slope = slope;
  for (std::size_t h = 0; h < heads; ++h) {
    const std::string hp = prefix + ".head" + std::to_string(h);
    p.w.push_back(make_weight(hp + ".w", {f_in, f_out}, f_in, rng));
    p.a_target.push_back(make_weight(hp + ".a_t", {f_out}, 2 * f_out, rng));
    p.a_source.push_back(make_weight(hp + ".a_s", {f_out}, 2 * f_out, rng));
  }
  return p;
}

void GatLayerParams::collect(std::vector<Parameter*>& out) {
  for (std::size_t h = 0; h < heads; ++h) {
    out.push_back(&w[h]);
    out.push_back(&a_target[h]);
    out.push_back(&a_source[h]);
  }
}

std::vector<Var> gat_attention(const GatHeadVars& head, Var projected,
                               const EdgeList& edges, double slope) {
  const std::size_t n = projected.value().dim(0);
  // Per-node halves of the attention logit; logit(s,t) = at[t] + as[s].
  Var at_scores = matvec(projected, head.a_target);
  Var as_scores = matvec(projected, head.a_source);

  std::vector<std::vector<std::size_t>> in_edges(n);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [s, t] = edges[e];
    if (s < 0 || t < 0 || static_cast<std::size_t>(s) >= n ||
        static_cast<std::size_t>(t) >= n) {
      throw DimensionError("gat: edge endpoint out of range");
    }
    in_edges[static_cast<std::size_t>(t)].push_back(e);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (in_edges[i].empty()) {
      throw ConfigError("gat: node " + std::to_string(i) +
                        " has no in-neighbors");
    }
  }

  std::vector<Var> alpha(edges.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Var> logits;
    logits.reserve(in_edges[i].size());
    for (std::size_t e : in_edges[i]) {
      Var li = element(at_scores, i);
      Var ls = element(as_scores, static_cast<std::size_t>(edges[e].first));
      logits.push_back(leaky_relu(add(li, ls), slope));
    }
    Var weights = softmax(concat(logits));
    for (std::size_t k = 0; k < in_edges[i].size(); ++k) {
      alpha[in_edges[i][k]] = element(weights, k);
    }
  }
  return alpha;
}

Var gat_aggregate(Var projected, const std::vector<Var>& alpha,
                  const EdgeList& edges, std::size_t nodes) {
  std::vector<std::vector<std::size_t>> in_edges(nodes);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    in_edges[static_cast<std::size_t>(edges[e].second)].push_back(e);
  }
  std::vector<Var> rows;
  rows.reserve(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    Var acc;
    for (std::size_t e : in_edges[i]) {
      Var contribution = scale_by(
          row(projected, static_cast<std::size_t>(edges[e].first)), alpha[e]);
      acc = acc.defined() ? add(acc, contribution) : contribution;
    }
    rows.push_back(relu(acc));
  }
  return stack_rows(rows);
}

Var gat_multihead(const std::vector<GatHeadVars>& heads, Var node_features,
                  const EdgeList& edges, double slope) {
  const std::size_t n = node_features.value().dim(0);
  std::vector<Var> outputs;
  outputs.reserve(heads.size());
  for (const auto& head : heads) {
    Var projected = matmul(node_features, head.w);
    std::vector<Var> alpha = gat_attention(head, projected, edges, slope);
    outputs.push_back(gat_aggregate(projected, alpha, edges, n));
  }
  if (outputs.size() == 1) return outputs[0];
  // Concatenate per-node rows across heads.
  std::vector<Var> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Var> parts;
    parts.reserve(outputs.size());
    for (const Var& o : outputs) parts.push_back(row(o, i));
    rows.push_back(concat(parts));
  }
  return stack_rows(rows);
}

GruLayerParams GruLayerParams::create(const std::string& prefix,
                                      std::size_t input, std::size_t hidden,
                                      Rng& rng) {
  auto w_in = [&](const char* g) {
    return make_weight(prefix + ".w_i" + g, {hidden, input}, input, rng);
  };
  auto w_hid = [&](const char* g) {
    return make_weight(prefix + ".w_h" + g, {hidden, hidden}, hidden, rng);
  };
  GruLayerParams p;
  p.w_ir = w_in("r"); p.b_ir = make_bias(prefix + ".b_ir", hidden);
  p.w_hr = w_hid("r"); p.b_hr = make_bias(prefix + ".b_hr", hidden);
  p.w_iz = w_in("z"); p.b_iz = make_bias(prefix + ".b_iz", hidden);
  p.w_hz = w_hid("z"); p.b_hz = make_bias(prefix + ".b_hz", hidden);
  p.w_in = w_in("n"); p.b_in = make_bias(prefix + ".b_in", hidden);
  p.w_hn = w_hid("n"); p.b_hn = make_bias(prefix + ".b_hn", hidden);
  return p;
}

void GruLayerParams::collect(std::vector<Parameter*>& out) {
  for (Parameter* p : {&w_ir, &b_ir, &w_hr, &b_hr, &w_iz, &b_iz, &w_hz, &b_hz,
                       &w_in, &b_in, &w_hn, &b_hn}) {
    out.push_back(p);
  }
}

GruLayerVars GruLayerVars::bind(Binder& binder, GruLayerParams& p) {
  GruLayerVars v;
  v.w_ir = binder(p.w_ir); v.b_ir = binder(p.b_ir);
  v.w_hr = binder(p.w_hr); v.b_hr = binder(p.b_hr);
  v.w_iz = binder(p.w_iz); v.b_iz = binder(p.b_iz);
  v.w_hz = binder(p.w_hz); v.b_hz = binder(p.b_hz);
  v.w_in = binder(p.w_in); v.b_in = binder(p.b_in);
  v.w_hn = binder(p.w_hn); v.b_hn = binder(p.b_hn);
  return v;
}

Var gru_cell(const GruLayerVars& l, Var x, Var h_prev) {
  Var r = sigmoid(add(add(matvec(l.w_ir, x), l.b_ir),
                      add(matvec(l.w_hr, h_prev), l.b_hr)));
  Var z = sigmoid(add(add(matvec(l.w_iz, x), l.b_iz),
                      add(matvec(l.w_hz, h_prev), l.b_hz)));
  Var n = ad::tanh(add(add(matvec(l.w_in, x), l.b_in),
                       mul(r, add(matvec(l.w_hn, h_prev), l.b_hn))));
  // h' = (1 - z) * n + z * h = n - z*n + z*h
  return add(sub(n, mul(z, n)), mul(z, h_prev));
}

// ---- Fusion forecaster ----

FusionModel::FusionModel(FusionConfig config, Rng& rng)
    : Forecaster("gnn"),
      config_(config),
      gru_(GruLayerParams::create("gnn.gru", config.node_input,
                                  config.gru_hidden, rng)),
      gat_(GatLayerParams::create("gnn.gat",
                                  config.gru_hidden + config.node_input,
                                  config.gat_out, config.gat_heads,
                                  config.gat_slope, rng)),
      decoder_(LstmLayerParams::create("gnn.decoder", 2,
                                       config.decoder_hidden, rng)) {
  const std::size_t enc = config.interaction_width() + config.gru_hidden;
  init_h_w_ = make_weight("gnn.init_h.w", {config.decoder_hidden, enc}, enc, rng);
  init_h_b_ = make_bias("gnn.init_h.b", config.decoder_hidden);
  init_c_w_ = make_weight("gnn.init_c.w", {config.decoder_hidden, enc}, enc, rng);
  init_c_b_ = make_bias("gnn.init_c.b", config.decoder_hidden);
  out_w_ = make_weight("gnn.out.w", {2, config.decoder_hidden},
                       config.decoder_hidden, rng);
  out_b_ = make_bias("gnn.out.b", 2);
  residual_w_ = make_weight("gnn.residual.w", {2, 4}, 4, rng);
}

std::vector<Parameter*> FusionModel::parameters() {
  std::vector<Parameter*> out;
  gru_.collect(out);
  gat_.collect(out);
  decoder_.collect(out);
  for (Parameter* p : {&init_h_w_, &init_h_b_, &init_c_w_, &init_c_b_,
                       &out_w_, &out_b_, &residual_w_}) {
    out.push_back(p);
  }
  return out;
}

Var FusionModel::history_encode(Binder& binder, const Tensor& trajectories) {
  if (trajectories.rank() != 3 ||
      trajectories.dim(2) != config_.node_input) {
    throw DimensionError("gnn: expected [H x N x " +
                         std::to_string(config_.node_input) + "], got " +
                         shape_str(trajectories.shape()));
  }
  Tape& tape = binder.tape();
  const std::size_t H = trajectories.dim(0);
  const std::size_t N = trajectories.dim(1);
  GruLayerVars gru = GruLayerVars::bind(binder, gru_);

  // Shared weights across players; every player runs the same recurrence.
  std::vector<Var> codes;
  codes.reserve(N);
  for (std::size_t o = 0; o < N; ++o) {
    Tensor rows({H, config_.node_input});
    for (std::size_t t = 0; t < H; ++t) {
      for (std::size_t f = 0; f < config_.node_input; ++f) {
        rows(t, f) = trajectories(t, o, f);
      }
    }
    Var input_rows = tape.constant(std::move(rows));
    Var h = tape.constant(Tensor::zeros({config_.gru_hidden}));
    for (std::size_t t = 0; t < H; ++t) {
      h = gru_cell(gru, row(input_rows, t), h);
    }
    codes.push_back(h);
  }
  return stack_rows(codes);
}

Var FusionModel::interaction_encode(Binder& binder, Var codes,
                                    Var node_pos_vel, const EdgeList& edges) {
  const std::size_t n = codes.value().dim(0);
  // Node features R_t: latent code plus current (pos, vel).
  std::vector<Var> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Var> parts{row(codes, i), row(node_pos_vel, i)};
    rows.push_back(concat(parts));
  }
  Var features = stack_rows(rows);
  std::vector<GatHeadVars> heads;
  heads.reserve(gat_.heads);
  for (std::size_t h = 0; h < gat_.heads; ++h) {
    heads.push_back({binder(gat_.w[h]), binder(gat_.a_target[h]),
                     binder(gat_.a_source[h])});
  }
  return gat_multihead(heads, features, edges, gat_.leaky_slope);
}

Var FusionModel::fusion_decode(Binder& binder, Var g_target, Var r_target,
                               Var target_state, std::size_t steps) {
  std::vector<Var> enc_parts{g_target, r_target};
  Var enc = concat(enc_parts);
  LstmState state;
  state.h = add(matvec(binder(init_h_w_), enc), binder(init_h_b_));
  state.c = add(matvec(binder(init_c_w_), enc), binder(init_c_b_));
  LstmLayerVars dec = LstmLayerVars::bind(binder, decoder_);
  Var out_w = binder(out_w_);
  Var out_b = binder(out_b_);
  Var residual = matvec(binder(residual_w_), target_state);

  // The decoder feeds its own prediction back; the first input is the
  // target's last observed position.
  Var prev = slice_vec(target_state, 0, 2);
  std::vector<Var> outputs;
  outputs.reserve(steps);
  for (std::size_t p = 0; p < steps; ++p) {
    state = lstm_cell(dec, prev, state);
    Var pos = add(add(matvec(out_w, state.h), out_b), residual);
    outputs.push_back(pos);
    prev = pos;
  }
  return stack_rows(outputs);
}

Var FusionModel::predict(Binder& binder, const Sample& sample, bool, Rng*) {
  Tape& tape = binder.tape();
  const std::size_t H = sample.history_steps();
  const std::size_t N = sample.objects();

  Tensor trajectories({H, N, 4});
  for (std::size_t t = 0; t < H; ++t) {
    for (std::size_t o = 0; o < N; ++o) {
      trajectories(t, o, 0) = sample.history_norm(t, o, sample.ch_px);
      trajectories(t, o, 1) = sample.history_norm(t, o, sample.ch_py);
      trajectories(t, o, 2) = sample.history_norm(t, o, sample.ch_vx);
      trajectories(t, o, 3) = sample.history_norm(t, o, sample.ch_vy);
    }
  }
  Var codes = history_encode(binder, trajectories);

  Tensor pos_vel({N, 4});
  for (std::size_t o = 0; o < N; ++o) {
    for (std::size_t f = 0; f < 4; ++f) {
      pos_vel(o, f) = trajectories(H - 1, o, f);
    }
  }
  Var node_pos_vel = tape.constant(pos_vel);
  Var interactions =
      interaction_encode(binder, codes, node_pos_vel, sample.graph.edges);

  Var g_target = row(interactions, sample.target);
  Var r_target = row(codes, sample.target);
  Var target_state = row(node_pos_vel, sample.target);
  return fusion_decode(binder, g_target, r_target, target_state,
                       sample.forecast_steps());
}

}  // namespace forecast::models

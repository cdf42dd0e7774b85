#pragma once

#include "forecast/models/common.hpp"
#include "forecast/models/recurrent.hpp"

namespace forecast::models {

using EdgeList = std::vector<std::pair<int, int>>;

// One GAT layer: shared projection W plus a per-head attention vector split
// into its target and source halves.
struct GatLayerParams {
  std::size_t heads = 4;
  double leaky_slope = 0.2;
  std::vector<Parameter> w;         // per head [F_in x F_out]
  std::vector<Parameter> a_target;  // per head [F_out]
  std::vector<Parameter> a_source;  // per head [F_out]

  static GatLayerParams create(const std::string& prefix, std::size_t f_in,
                               std::size_t f_out, std::size_t heads,
                               double slope, Rng& rng);
  void collect(std::vector<Parameter*>& out);
};

struct GatHeadVars {
  Var w;
  Var a_target;
  Var a_source;
};

// Attention coefficients per directed edge (edge-list order):
// alpha_ij = softmax_j of leaky_relu(a . [W h_i ++ W h_j]) over the
// in-neighborhood of each target i. Every node must have >= 1 in-edge.
std::vector<Var> gat_attention(const GatHeadVars& head, Var projected,
                               const EdgeList& edges, double slope);

// h'_i = relu(sum_j alpha_ij W h_j), aggregated in edge-list order.
Var gat_aggregate(Var projected, const std::vector<Var>& alpha,
                  const EdgeList& edges, std::size_t nodes);

// Multi-head attention + aggregation; per-head outputs concatenated to
// [N x heads*F_out].
Var gat_multihead(const std::vector<GatHeadVars>& heads, Var node_features,
                  const EdgeList& edges, double slope);

struct GruLayerParams {
  Parameter w_ir, b_ir, w_hr, b_hr;  // reset gate
  Parameter w_iz, b_iz, w_hz, b_hz;  // update gate
  Parameter w_in, b_in, w_hn, b_hn;  // candidate

  static GruLayerParams create(const std::string& prefix, std::size_t input,
                               std::size_t hidden, Rng& rng);
  void collect(std::vector<Parameter*>& out);
};

struct GruLayerVars {
  Var w_ir, b_ir, w_hr, b_hr;
  Var w_iz, b_iz, w_hz, b_hz;
  Var w_in, b_in, w_hn, b_hn;

  static GruLayerVars bind(Binder& binder, GruLayerParams& p);
};

// r = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
// z = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
// n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
// h' = (1 - z) * n + z * h
Var gru_cell(const GruLayerVars& layer, Var x, Var h_prev);

struct FusionConfig {
  std::size_t node_input = 4;  // (pos_x, pos_y, v_x, v_y) per player
  std::size_t gru_hidden = 64;
  std::size_t gat_out = 16;
  std::size_t gat_heads = 4;
  double gat_slope = 0.2;
  std::size_t decoder_hidden = 128;
  std::size_t forecast_steps = 50;

  std::size_t interaction_width() const { return gat_heads * gat_out; }
};

// RNN-GAT-RNN encoder-decoder: a shared GRU encodes each player's history,
// a GAT encodes interactions over the scene graph, and an LSTM decoder
// iteratively predicts the target player's next position with a residual
// projection of its last observed state.
class FusionModel final : public Forecaster {
 public:
  FusionModel(FusionConfig config, Rng& rng);
  OutputKind output() const override { return OutputKind::kPositions; }
  std::vector<Parameter*> parameters() override;
  Var predict(Binder& binder, const Sample& sample, bool training,
              Rng* dropout_rng) override;

  // Stage helpers, also exercised directly by tests.
  Var history_encode(Binder& binder, const Tensor& trajectories);  // [N x hidden]
  Var interaction_encode(Binder& binder, Var codes, Var node_pos_vel,
                         const EdgeList& edges);  // [N x K*F_out]
  Var fusion_decode(Binder& binder, Var g_target, Var r_target,
                    Var target_state, std::size_t steps);  // [P x 2]

  const FusionConfig& config() const { return config_; }

 private:
  FusionConfig config_;
  GruLayerParams gru_;
  GatLayerParams gat_;
  LstmLayerParams decoder_;
  Parameter init_h_w_, init_h_b_, init_c_w_, init_c_b_;
  Parameter out_w_, out_b_;
  Parameter residual_w_;  // [2 x 4] projection of the last observed state
};

}  // namespace forecast::models

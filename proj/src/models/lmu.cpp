#include "forecast/models/lmu.hpp"

#include <cmath>

#include "forecast/errors.hpp"

namespace forecast::models {

std::pair<Tensor, Tensor> lmu_matrices(std::size_t d, bool row_scaled) {
  if (d == 0) throw ParameterError("lmu_matrices: d must be positive");
  Tensor a({d, d});
  Tensor b({d});
  for (std::size_t i = 0; i < d; ++i) {
    const double row = row_scaled ? 2.0 * static_cast<double>(i) + 1.0 : 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      double v;
      if (i < j) {
        v = -1.0;
      } else {
        v = (i - j + 1) % 2 == 0 ? 1.0 : -1.0;  // (-1)^(i-j+1)
      }
      a(i, j) = row * v;
    }
    b[i] = (2.0 * static_cast<double>(i) + 1.0) * (i % 2 == 0 ? 1.0 : -1.0);
  }
  return {std::move(a), std::move(b)};
}

Discretization discretization_from_string(const std::string& name) {
  if (name == "euler") return Discretization::kEuler;
  if (name == "zoh") return Discretization::kZoh;
  throw ParameterError("unknown discretization method: " + name);
}

namespace {

Tensor mat_mul(const Tensor& a, const Tensor& b) {
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double v = a(i, kk);
      if (v == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) out(i, j) += v * b(kk, j);
    }
  }
  return out;
}

Tensor mat_axpy(double alpha, const Tensor& x, const Tensor& y) {
  Tensor out = y;
  out.add_scaled_(x, alpha);
  return out;
}

Tensor identity(std::size_t n) {
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

double norm1(const Tensor& a) {
  const std::size_t n = a.dim(0);
  double best = 0.0;
  for (std::size_t j = 0; j < a.dim(1); ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < n; ++i) col += std::fabs(a(i, j));
    best = std::max(best, col);
  }
  return best;
}

// Solves A X = B in place via LU with partial pivoting.
Tensor lu_solve(Tensor a, Tensor b) {
  const std::size_t n = a.dim(0);
  std::vector<std::size_t> piv(n);
  for (std::size_t i = 0; i < n; ++i) piv[i] = i;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::fabs(a(r, col)) > std::fabs(a(pivot, col))) pivot = r;
    }
    if (a(pivot, col) == 0.0) {
      throw NumericError("expm: singular Pade denominator");
    }
    if (pivot != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(col, j), a(pivot, j));
      for (std::size_t j = 0; j < b.dim(1); ++j) std::swap(b(col, j), b(pivot, j));
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a(r, col) / a(col, col);
      a(r, col) = 0.0;
      if (f == 0.0) continue;
      for (std::size_t j = col + 1; j < n; ++j) a(r, j) -= f * a(col, j);
      for (std::size_t j = 0; j < b.dim(1); ++j) b(r, j) -= f * b(col, j);
    }
  }
  for (std::size_t col = n; col-- > 0;) {
    for (std::size_t j = 0; j < b.dim(1); ++j) {
      double s = b(col, j);
      for (std::size_t k = col + 1; k < n; ++k) s -= a(col, k) * b(k, j);
      b(col, j) = s / a(col, col);
    }
  }
  return b;
}

}  // namespace

Tensor expm(const Tensor& m) {
  if (m.rank() != 2 || m.dim(0) != m.dim(1)) {
    throw DimensionError("expm: expected a square matrix, got " +
                         shape_str(m.shape()));
  }
  const std::size_t n = m.dim(0);
  // Higham's Pade-13 coefficients.
  static const double b[14] = {
      64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
      1187353796428800.0,  129060195264000.0,   10559470521600.0,
      670442572800.0,      33522128640.0,       1323241920.0,
      40840800.0,          960960.0,            16380.0,
      182.0,               1.0};
  const double theta13 = 5.371920351148152;

  Tensor a = m;
  int squarings = 0;
  const double nrm = norm1(a);
  if (nrm > theta13) {
    squarings = static_cast<int>(std::ceil(std::log2(nrm / theta13)));
    const double scale = std::ldexp(1.0, -squarings);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] *= scale;
  }

  const Tensor eye = identity(n);
  const Tensor a2 = mat_mul(a, a);
  const Tensor a4 = mat_mul(a2, a2);
  const Tensor a6 = mat_mul(a2, a4);

  // U = A (A6 (b13 A6 + b11 A4 + b9 A2) + b7 A6 + b5 A4 + b3 A2 + b1 I)
  Tensor w1 = mat_axpy(b[13], a6, mat_axpy(b[11], a4, Tensor::zeros({n, n})));
  w1.add_scaled_(a2, b[9]);
  Tensor w = mat_mul(a6, w1);
  w.add_scaled_(a6, b[7]);
  w.add_scaled_(a4, b[5]);
  w.add_scaled_(a2, b[3]);
  w.add_scaled_(eye, b[1]);
  const Tensor u = mat_mul(a, w);

  // V = A6 (b12 A6 + b10 A4 + b8 A2) + b6 A6 + b4 A4 + b2 A2 + b0 I
  Tensor z1 = mat_axpy(b[12], a6, mat_axpy(b[10], a4, Tensor::zeros({n, n})));
  z1.add_scaled_(a2, b[8]);
  Tensor v = mat_mul(a6, z1);
  v.add_scaled_(a6, b[6]);
  v.add_scaled_(a4, b[4]);
  v.add_scaled_(a2, b[2]);
  v.add_scaled_(eye, b[0]);

  // (V - U) F = (V + U)
  Tensor vmu = v;
  vmu.add_scaled_(u, -1.0);
  Tensor vpu = v;
  vpu.add_scaled_(u, 1.0);
  Tensor f = lu_solve(std::move(vmu), std::move(vpu));
  for (int s = 0; s < squarings; ++s) f = mat_mul(f, f);
  return f;
}

std::pair<Tensor, Tensor> discretize(const Tensor& a, const Tensor& b,
                                     double theta, Discretization method,
                                     double dt) {
  if (!(theta > 0.0)) throw ParameterError("discretize: theta must be positive");
  if (a.rank() != 2 || a.dim(0) != a.dim(1) || b.rank() != 1 ||
      b.size() != a.dim(0)) {
    throw DimensionError("discretize: expected A [d x d] and B [d]");
  }
  const std::size_t d = a.dim(0);
  const double h = dt / theta;

  if (method == Discretization::kEuler) {
    Tensor a_bar = identity(d);
    a_bar.add_scaled_(a, h);
    Tensor b_bar = b;
    for (std::size_t i = 0; i < d; ++i) b_bar[i] *= h;
    return {std::move(a_bar), std::move(b_bar)};
  }

  // ZOH through the augmented matrix [[A, B], [0, 0]] * h: its exponential
  // carries exp(hA) in the top-left block and the B integral in the last
  // column, avoiding an explicit inverse of A.
  Tensor aug({d + 1, d + 1});
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) aug(i, j) = h * a(i, j);
    aug(i, d) = h * b[i];
  }
  Tensor e = expm(aug);
  Tensor a_bar({d, d});
  Tensor b_bar({d});
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) a_bar(i, j) = e(i, j);
    b_bar[i] = e(i, d);
  }
  return {std::move(a_bar), std::move(b_bar)};
}

LmuState lmu_cell(const LmuLayerVars& l, Var x, const LmuState& prev) {
  Var u = add(ad::dot(l.e_x, x), add(ad::dot(l.e_h, prev.h),
                                     ad::dot(l.e_m, prev.m)));
  Var m = add(matvec(l.a_bar, prev.m), scale_by(l.b_bar, u));
  Var h = ad::tanh(add(matvec(l.w_x, x),
                       add(matvec(l.w_h, prev.h), matvec(l.w_m, m))));
  return {h, m};
}

// ---- Forecaster ----

LmuModel::LmuModel(LmuConfig config, Rng& rng)
    : Forecaster("lmu"), config_(config) {
  auto [a, b] = lmu_matrices(config.memory_order, config.row_scaled_a);
  std::tie(a_bar_, b_bar_) = discretize(a, b, config.theta, config.method);

  std::size_t in = config.input_width;
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::string prefix = "lmu.layer" + std::to_string(l);
    Layer layer;
    layer.e_x = make_weight(prefix + ".e_x", {in}, in, rng);
    layer.e_h = make_weight(prefix + ".e_h", {config.hidden}, config.hidden, rng);
    layer.e_m = make_weight(prefix + ".e_m", {config.memory_order},
                            config.memory_order, rng);
    layer.w_x = make_weight(prefix + ".w_x", {config.hidden, in}, in, rng);
    layer.w_h = make_weight(prefix + ".w_h", {config.hidden, config.hidden},
                            config.hidden, rng);
    layer.w_m = make_weight(prefix + ".w_m",
                            {config.hidden, config.memory_order},
                            config.memory_order, rng);
    layers_.push_back(std::move(layer));
    in = config.hidden;
  }
  const std::size_t out = config.forecast_steps * 2;
  head_w_ = make_weight("lmu.head.w", {out, config.hidden}, config.hidden, rng);
  head_b_ = make_bias("lmu.head.b", out);
}

std::vector<Parameter*> LmuModel::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : layers_) {
    for (Parameter* p : {&l.e_x, &l.e_h, &l.e_m, &l.w_x, &l.w_h, &l.w_m}) {
      out.push_back(p);
    }
  }
  out.push_back(&head_w_);
  out.push_back(&head_b_);
  return out;
}

Var LmuModel::forward_rows(Binder& binder, const Tensor& rows, bool training,
                           Rng* dropout_rng) {
  if (rows.dim(1) != config_.input_width) {
    throw DimensionError("lmu: input width " + std::to_string(rows.dim(1)) +
                         " does not match configured " +
                         std::to_string(config_.input_width));
  }
  Tape& tape = binder.tape();
  Var a_bar = tape.constant(a_bar_);
  Var b_bar = tape.constant(b_bar_);

  const std::size_t T = rows.dim(0);
  std::vector<LmuLayerVars> layers;
  std::vector<LmuState> states;
  for (auto& l : layers_) {
    LmuLayerVars v;
    v.e_x = binder(l.e_x);
    v.e_h = binder(l.e_h);
    v.e_m = binder(l.e_m);
    v.w_x = binder(l.w_x);
    v.w_h = binder(l.w_h);
    v.w_m = binder(l.w_m);
    v.a_bar = a_bar;
    v.b_bar = b_bar;
    layers.push_back(v);
    states.push_back({tape.constant(Tensor::zeros({config_.hidden})),
                      tape.constant(Tensor::zeros({config_.memory_order}))});
  }

  Var input_rows = tape.constant(rows);
  Var last;
  for (std::size_t t = 0; t < T; ++t) {
    Var x = row(input_rows, t);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      states[l] = lmu_cell(layers[l], x, states[l]);
      x = states[l].h;
      if (l + 1 < layers.size() && training && dropout_rng) {
        x = ad::dropout(x, config_.dropout, *dropout_rng, true);
      }
    }
    last = x;
  }
  Var y = add(matvec(binder(head_w_), last), binder(head_b_));
  return reshape(y, {config_.forecast_steps, 2});
}

Var LmuModel::predict(Binder& binder, const Sample& sample, bool training,
                      Rng* dropout_rng) {
  const bool positions = config_.input == LmuInput::kPositions;
  Tensor rows = scene_feature_rows(sample.history_norm,
                                   positions ? sample.ch_px : sample.ch_vx,
                                   positions ? sample.ch_py : sample.ch_vy);
  return forward_rows(binder, rows, training, dropout_rng);
}

}  // namespace forecast::models

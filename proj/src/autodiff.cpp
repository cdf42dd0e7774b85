#include "forecast/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "forecast/errors.hpp"

namespace forecast::ad {

namespace {

Tape& common_tape(Var a, Var b, const char* op) {
  if (a.tape() != b.tape() || a.tape() == nullptr) {
    throw ContractError(std::string(op) + ": operands on different tapes");
  }
  return *a.tape();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " +
                         std::to_string(rank) + ", got " +
                         shape_str(t.shape()));
  }
}

void require_scalar_var(const Tensor& t, const char* op) {
  if (t.size() != 1) {
    throw DimensionError(std::string(op) + ": expected scalar, got " +
                         shape_str(t.shape()));
  }
}

}  // namespace

const Tensor& Var::value() const { return tape_->value_of(id_); }

const Tensor* Gradients::find(const Var& v) const {
  const auto id = static_cast<std::uint32_t>(v.id());
  const auto it = std::lower_bound(leaf_ids_.begin(), leaf_ids_.end(), id);
  if (it == leaf_ids_.end() || *it != id) return nullptr;
  return &tensors_[static_cast<std::size_t>(it - leaf_ids_.begin())];
}

const Tensor& Gradients::at(const Var& v) const {
  const Tensor* t = find(v);
  if (!t) throw ContractError("gradients: no entry for node " + std::to_string(v.id()));
  return *t;
}

Var Tape::leaf(Tensor value) {
  const bool rg = value.requires_grad;
  return leaf(std::move(value), rg);
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.op = "leaf";
  n.value = std::move(value);
  n.needs_grad = requires_grad;
  n.is_leaf = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::emit(const char* op, Tensor value, bool needs_grad,
               BackwardFn backward) {
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(std::size_t node_id, const Tensor& grad) {
  if (!nodes_[node_id].needs_grad) return;
  if (!has_grad_[node_id]) {
    grad_[node_id] = grad;
    has_grad_[node_id] = 1;
  } else {
    grad_[node_id].add_(grad);
  }
}

void Tape::accumulate_at(std::size_t node_id, std::size_t flat_index,
                         double g) {
  if (!nodes_[node_id].needs_grad) return;
  if (!has_grad_[node_id]) {
    grad_[node_id] = Tensor::zeros(nodes_[node_id].value.shape());
    has_grad_[node_id] = 1;
  }
  grad_[node_id][flat_index] += g;
}

Gradients Tape::backward(const Var& loss) {
  if (loss.tape() != this) {
    throw ContractError("backward: loss lives on a different tape");
  }
  const Tensor& lv = nodes_[loss.id()].value;
  if (lv.size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " +
                        shape_str(lv.shape()));
  }

  grad_.assign(nodes_.size(), Tensor());
  has_grad_.assign(nodes_.size(), 0);

  if (nodes_[loss.id()].needs_grad) {
    grad_[loss.id()] = Tensor::full(lv.shape(), 1.0);
    has_grad_[loss.id()] = 1;
  }

  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    if (!has_grad_[i]) continue;
    Node& n = nodes_[i];
    if (n.backward) n.backward(*this, grad_[i]);
  }

  Gradients out;
  for (std::size_t i = 0; i <= loss.id(); ++i) {
    const Node& n = nodes_[i];
    if (!n.is_leaf || !n.needs_grad) continue;
    out.leaf_ids_.push_back(static_cast<std::uint32_t>(i));
    out.tensors_.push_back(has_grad_[i] ? grad_[i]
                                        : Tensor::zeros(n.value.shape()));
  }
  grad_.clear();
  has_grad_.clear();
  return out;
}

// ---- Elementwise ----

Var add(Var a, Var b) {
  Tape& t = common_tape(a, b, "add");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape(av, bv, "add");
  Tensor out = av;
  out.add_(bv);
  const bool ng = t.needs_grad(a) || t.needs_grad(b);
  const auto ai = a.id(), bi = b.id();
  return t.emit("add", std::move(out), ng, [ai, bi](Tape& tp, const Tensor& g) {
    tp.accumulate(ai, g);
    tp.accumulate(bi, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = common_tape(a, b, "sub");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape(av, bv, "sub");
  Tensor out = av;
  out.add_scaled_(bv, -1.0);
  const bool ng = t.needs_grad(a) || t.needs_grad(b);
  const auto ai = a.id(), bi = b.id();
  return t.emit("sub", std::move(out), ng, [ai, bi](Tape& tp, const Tensor& g) {
    tp.accumulate(ai, g);
    Tensor gneg = g;
    for (double& x : gneg.raw()) x = -x;
    tp.accumulate(bi, gneg);
  });
}

Var mul(Var a, Var b) {
  Tape& t = common_tape(a, b, "mul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape(av, bv, "mul");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const bool ng = t.needs_grad(a) || t.needs_grad(b);
  const auto ai = a.id(), bi = b.id();
  return t.emit("mul", std::move(out), ng, [ai, bi](Tape& tp, const Tensor& g) {
    const Tensor& av2 = tp.value_of(ai);
    const Tensor& bv2 = tp.value_of(bi);
    Tensor ga(av2.shape()), gb(bv2.shape());
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] = g[i] * bv2[i];
      gb[i] = g[i] * av2[i];
    }
    tp.accumulate(ai, ga);
    tp.accumulate(bi, gb);
  });
}

Var scale(Var a, double c) {
  Tape& t = *a.tape();
  Tensor out = a.value();
  for (double& x : out.raw()) x *= c;
  const auto ai = a.id();
  return t.emit("scale", std::move(out), t.needs_grad(a),
                [ai, c](Tape& tp, const Tensor& g) {
                  Tensor ga = g;
                  for (double& x : ga.raw()) x *= c;
                  tp.accumulate(ai, ga);
                });
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale_by(Var a, Var s) {
  Tape& t = common_tape(a, s, "scale_by");
  require_scalar_var(s.value(), "scale_by");
  const double sv = s.value()[0];
  Tensor out = a.value();
  for (double& x : out.raw()) x *= sv;
  const bool ng = t.needs_grad(a) || t.needs_grad(s);
  const auto ai = a.id(), si = s.id();
  return t.emit("scale_by", std::move(out), ng,
                [ai, si](Tape& tp, const Tensor& g) {
                  const Tensor& av = tp.value_of(ai);
                  const double sv2 = tp.value_of(si)[0];
                  Tensor ga = g;
                  for (double& x : ga.raw()) x *= sv2;
                  tp.accumulate(ai, ga);
                  double gs = 0.0;
                  for (std::size_t i = 0; i < g.size(); ++i) gs += g[i] * av[i];
                  tp.accumulate(si, Tensor(tp.value_of(si).shape(), {gs}));
                });
}

Var div_by(Var a, Var s) {
  Tape& t = common_tape(a, s, "div_by");
  require_scalar_var(s.value(), "div_by");
  const double sv = s.value()[0];
  Tensor out = a.value();
  for (double& x : out.raw()) x /= sv;
  const bool ng = t.needs_grad(a) || t.needs_grad(s);
  const auto ai = a.id(), si = s.id();
  return t.emit("div_by", std::move(out), ng,
                [ai, si](Tape& tp, const Tensor& g) {
                  const Tensor& av = tp.value_of(ai);
                  const double sv2 = tp.value_of(si)[0];
                  Tensor ga = g;
                  for (double& x : ga.raw()) x /= sv2;
                  tp.accumulate(ai, ga);
                  double gs = 0.0;
                  for (std::size_t i = 0; i < g.size(); ++i) gs += g[i] * av[i];
                  gs = -gs / (sv2 * sv2);
                  tp.accumulate(si, Tensor(tp.value_of(si).shape(), {gs}));
                });
}

Var sqrt(Var a) {
  Tape& t = *a.tape();
  Tensor out = a.value();
  for (double& x : out.raw()) x = std::sqrt(x);
  const auto ai = a.id();
  const Tensor saved = out;
  return t.emit("sqrt", std::move(out), t.needs_grad(a),
                [ai, saved](Tape& tp, const Tensor& g) {
                  Tensor ga(saved.shape());
                  for (std::size_t i = 0; i < g.size(); ++i) {
                    ga[i] = g[i] / (2.0 * saved[i]);
                  }
                  tp.accumulate(ai, ga);
                });
}

Var sum(Var a) {
  Tape& t = *a.tape();
  const Tensor& av = a.value();
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i];
  const auto ai = a.id();
  return t.emit("sum", Tensor::scalar(s), t.needs_grad(a),
                [ai](Tape& tp, const Tensor& g) {
                  Tensor ga = Tensor::full(tp.value_of(ai).shape(), g[0]);
                  tp.accumulate(ai, ga);
                });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ParameterError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var mse(Var pred, Var target) {
  Var d = sub(pred, target);
  return mean(mul(d, d));
}

// ---- Shape ----

Var reshape(Var a, Shape shape) {
  Tape& t = *a.tape();
  const Tensor& av = a.value();
  if (numel(shape) != av.size()) {
    throw DimensionError("reshape: " + shape_str(av.shape()) + " to " +
                         shape_str(shape) + " changes element count");
  }
  Tensor out(shape, av.raw());
  const auto ai = a.id();
  return t.emit("reshape", std::move(out), t.needs_grad(a),
                [ai](Tape& tp, const Tensor& g) {
                  tp.accumulate(ai, Tensor(tp.value_of(ai).shape(), g.raw()));
                });
}

Var transpose(Var a) {
  Tape& t = *a.tape();
  const Tensor& av = a.value();
  require_rank(av, 2, "transpose");
  const std::size_t m = av.dim(0), n = av.dim(1);
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out(j, i) = av(i, j);
  }
  const auto ai = a.id();
  return t.emit("transpose", std::move(out), t.needs_grad(a),
                [ai, m, n](Tape& tp, const Tensor& g) {
                  Tensor ga({m, n});
                  for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t j = 0; j < n; ++j) ga(i, j) = g(j, i);
                  }
                  tp.accumulate(ai, ga);
                });
}

Var row(Var a, std::size_t i) {
  Tape& t = *a.tape();
  const Tensor& av = a.value();
  require_rank(av, 2, "row");
  if (i >= av.dim(0)) {
    throw DimensionError("row: index " + std::to_string(i) + " out of " +
                         std::to_string(av.dim(0)));
  }
  const std::size_t n = av.dim(1);
  Tensor out({n});
  for (std::size_t j = 0; j < n; ++j) out[j] = av(i, j);
  const auto ai = a.id();
  return t.emit("row", std::move(out), t.needs_grad(a),
                [ai, i, n](Tape& tp, const Tensor& g) {
                  for (std::size_t j = 0; j < n; ++j) {
                    tp.accumulate_at(ai, i * n + j, g[j]);
                  }
                });
}

Var element(Var a, std::size_t i) {
  Tape& t = *a.tape();
  const Tensor& av = a.value();
  if (i >= av.size()) {
    throw DimensionError("element: index " + std::to_string(i) + " out of " +
                         std::to_string(av.size()));
  }
  const auto ai = a.id();
  return t.emit("element", Tensor::scalar(av[i]), t.needs_grad(a),
                [ai, i](Tape& tp, const Tensor& g) {
                  tp.accumulate_at(ai, i, g[0]);
                });
}

Var slice_vec(Var a, std::size_t start, std::size_t len) {
  Tape& t = *a.tape();
  const Tensor& av = a.value();
  require_rank(av, 1, "slice_vec");
  if (start + len > av.size()) {
    throw DimensionError("slice_vec: [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") out of " +
                         std::to_string(av.size()));
  }
  Tensor out({len});
  for (std::size_t j = 0; j < len; ++j) out[j] = av[start + j];
  const auto ai = a.id();
  return t.emit("slice_vec", std::move(out), t.needs_grad(a),
                [ai, start, len](Tape& tp, const Tensor& g) {
                  for (std::size_t j = 0; j < len; ++j) {
                    tp.accumulate_at(ai, start + j, g[j]);
                  }
                });
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw ParameterError("stack_rows: empty input");
  Tape& t = *rows[0].tape();
  const std::size_t n = rows[0].value().size();
  Tensor out({rows.size(), n});
  bool ng = false;
  std::vector<std::size_t> ids(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Tensor& rv = rows[r].value();
    require_rank(rv, 1, "stack_rows");
    if (rv.size() != n) throw DimensionError("stack_rows: ragged rows");
    for (std::size_t j = 0; j < n; ++j) out(r, j) = rv[j];
    ng = ng || t.needs_grad(rows[r]);
    ids[r] = rows[r].id();
  }
  return t.emit("stack_rows", std::move(out), ng,
                [ids, n](Tape& tp, const Tensor& g) {
                  for (std::size_t r = 0; r < ids.size(); ++r) {
                    Tensor gr({n});
                    for (std::size_t j = 0; j < n; ++j) gr[j] = g(r, j);
                    tp.accumulate(ids[r], gr);
                  }
                });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ParameterError("concat: empty input");
  Tape& t = *parts[0].tape();
  std::size_t total = 0;
  bool ng = false;
  std::vector<std::size_t> ids(parts.size());
  std::vector<std::size_t> sizes(parts.size());
  for (std::size_t p = 0; p < parts.size(); ++p) {
    if (parts[p].value().rank() > 1) {
      throw DimensionError("concat: expected scalars or vectors, got " +
                           shape_str(parts[p].value().shape()));
    }
    sizes[p] = parts[p].value().size();
    total += sizes[p];
    ng = ng || t.needs_grad(parts[p]);
    ids[p] = parts[p].id();
  }
  Tensor out({total});
  std::size_t off = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& pv = parts[p].value();
    for (std::size_t j = 0; j < sizes[p]; ++j) out[off + j] = pv[j];
    off += sizes[p];
  }
  return t.emit("concat", std::move(out), ng,
                [ids, sizes](Tape& tp, const Tensor& g) {
                  std::size_t off2 = 0;
                  for (std::size_t p = 0; p < ids.size(); ++p) {
                    Tensor gp(tp.value_of(ids[p]).shape());
                    for (std::size_t j = 0; j < sizes[p]; ++j) {
                      gp[j] = g[off2 + j];
                    }
                    tp.accumulate(ids[p], gp);
                    off2 += sizes[p];
                  }
                });
}

// ---- Linear algebra ----

Var matmul(Var a, Var b) {
  Tape& t = common_tape(a, b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank(av, 2, "matmul");
  require_rank(bv, 2, "matmul");
  if (av.dim(1) != bv.dim(0)) {
    throw DimensionError("matmul: inner dimensions differ, " +
                         shape_str(av.shape()) + " x " + shape_str(bv.shape()));
  }
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out({m, n});
  const double* ap = av.data();
  const double* bp = bv.data();
  double* op = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = ap[i * k + kk];
      if (aik == 0.0) continue;
      const double* brow = bp + kk * n;
      double* orow = op + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
    }
  }
  const bool ng = t.needs_grad(a) || t.needs_grad(b);
  const auto ai = a.id(), bi = b.id();
  return t.emit(
      "matmul", std::move(out), ng, [ai, bi, m, k, n](Tape& tp, const Tensor& g) {
        const Tensor& av2 = tp.value_of(ai);
        const Tensor& bv2 = tp.value_of(bi);
        // dA = g * B^T
        Tensor ga({m, k});
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            const double gij = g(i, j);
            if (gij == 0.0) continue;
            for (std::size_t kk = 0; kk < k; ++kk) {
              ga(i, kk) += gij * bv2(kk, j);
            }
          }
        }
        tp.accumulate(ai, ga);
        // dB = A^T * g
        Tensor gb({k, n});
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = av2(i, kk);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
              gb(kk, j) += aik * g(i, j);
            }
          }
        }
        tp.accumulate(bi, gb);
      });
}

Var matvec(Var a, Var x) {
  Tape& t = common_tape(a, x, "matvec");
  const Tensor& av = a.value();
  const Tensor& xv = x.value();
  require_rank(av, 2, "matvec");
  require_rank(xv, 1, "matvec");
  if (av.dim(1) != xv.dim(0)) {
    throw DimensionError("matvec: inner dimensions differ, " +
                         shape_str(av.shape()) + " x " + shape_str(xv.shape()));
  }
  const std::size_t m = av.dim(0), k = av.dim(1);
  Tensor out({m});
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = av.data() + i * k;
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += arow[j] * xv[j];
    out[i] = s;
  }
  const bool ng = t.needs_grad(a) || t.needs_grad(x);
  const auto ai = a.id(), xi = x.id();
  return t.emit("matvec", std::move(out), ng,
                [ai, xi, m, k](Tape& tp, const Tensor& g) {
                  const Tensor& av2 = tp.value_of(ai);
                  const Tensor& xv2 = tp.value_of(xi);
                  Tensor ga({m, k});
                  for (std::size_t i = 0; i < m; ++i) {
                    const double gi = g[i];
                    if (gi == 0.0) continue;
                    for (std::size_t j = 0; j < k; ++j) {
                      ga(i, j) = gi * xv2[j];
                    }
                  }
                  tp.accumulate(ai, ga);
                  Tensor gx({k});
                  for (std::size_t i = 0; i < m; ++i) {
                    const double gi = g[i];
                    if (gi == 0.0) continue;
                    for (std::size_t j = 0; j < k; ++j) {
                      gx[j] += gi * av2(i, j);
                    }
                  }
                  tp.accumulate(xi, gx);
                });
}

Var add_rowwise(Var x, Var b) {
  Tape& t = common_tape(x, b, "add_rowwise");
  const Tensor& xv = x.value();
  const Tensor& bv = b.value();
  require_rank(xv, 2, "add_rowwise");
  require_rank(bv, 1, "add_rowwise");
  const std::size_t m = xv.dim(0), n = xv.dim(1);
  if (bv.size() != n) {
    throw DimensionError("add_rowwise: bias " + shape_str(bv.shape()) +
                         " vs rows of " + shape_str(xv.shape()));
  }
  Tensor out = xv;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out(i, j) += bv[j];
  }
  const bool ng = t.needs_grad(x) || t.needs_grad(b);
  const auto xi = x.id(), bi = b.id();
  return t.emit("add_rowwise", std::move(out), ng,
                [xi, bi, m, n](Tape& tp, const Tensor& g) {
                  tp.accumulate(xi, g);
                  Tensor gb({n});
                  for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t j = 0; j < n; ++j) gb[j] += g(i, j);
                  }
                  tp.accumulate(bi, gb);
                });
}

Var weight_norm(Var v, Var g) {
  Tape& t = common_tape(v, g, "weight_norm");
  const Tensor& vv = v.value();
  const Tensor& gv = g.value();
  if (vv.rank() == 0) throw DimensionError("weight_norm: scalar direction");
  const std::size_t cout = vv.shape().back();
  if (gv.rank() != 1 || gv.size() != cout) {
    throw DimensionError("weight_norm: scale must be [" +
                         std::to_string(cout) + "], got " +
                         shape_str(gv.shape()));
  }
  const std::size_t rows = vv.size() / cout;
  std::vector<double> norms(cout, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cout; ++c) {
      const double x = vv[r * cout + c];
      norms[c] += x * x;
    }
  }
  for (double& x : norms) x = std::sqrt(x);
  Tensor out(vv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cout; ++c) {
      out[r * cout + c] = gv[c] * vv[r * cout + c] / norms[c];
    }
  }
  const bool ng = t.needs_grad(v) || t.needs_grad(g);
  const auto vi = v.id(), gi = g.id();
  return t.emit(
      "weight_norm", std::move(out), ng,
      [vi, gi, rows, cout, norms](Tape& tp, const Tensor& g_out) {
        const Tensor& vv2 = tp.value_of(vi);
        const Tensor& gv2 = tp.value_of(gi);
        Tensor gvdir(vv2.shape());
        Tensor gscale({cout});
        for (std::size_t c = 0; c < cout; ++c) {
          // dg = (v . dw) / n; dv = (g/n) (dw - v (v . dw) / n^2)
          double vdw = 0.0;
          for (std::size_t r = 0; r < rows; ++r) {
            vdw += vv2[r * cout + c] * g_out[r * cout + c];
          }
          const double n = norms[c];
          gscale[c] = vdw / n;
          const double coef = gv2[c] / n;
          for (std::size_t r = 0; r < rows; ++r) {
            gvdir[r * cout + c] =
                coef * (g_out[r * cout + c] -
                        vv2[r * cout + c] * vdw / (n * n));
          }
        }
        tp.accumulate(vi, gvdir);
        tp.accumulate(gi, gscale);
      });
}

// ---- Activations ----

Activation activation_from_string(const std::string& name) {
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  if (name == "leaky_relu") return Activation::kLeakyRelu;
  throw ParameterError("unknown activation kind: " + name);
}

Var activate(Var a, Activation kind, double slope) {
  switch (kind) {
    case Activation::kSigmoid:
      return sigmoid(a);
    case Activation::kTanh:
      return tanh(a);
    case Activation::kRelu:
      return relu(a);
    case Activation::kLeakyRelu:
      return leaky_relu(a, slope);
  }
  throw ParameterError("unknown activation kind");
}

Var sigmoid(Var a) {
  Tape& t = *a.tape();
  Tensor out = a.value();
  for (double& x : out.raw()) x = 1.0 / (1.0 + std::exp(-x));
  const auto ai = a.id();
  const Tensor saved = out;
  return t.emit("sigmoid", std::move(out), t.needs_grad(a),
                [ai, saved](Tape& tp, const Tensor& g) {
                  Tensor ga(saved.shape());
                  for (std::size_t i = 0; i < g.size(); ++i) {
                    ga[i] = g[i] * saved[i] * (1.0 - saved[i]);
                  }
                  tp.accumulate(ai, ga);
                });
}

Var tanh(Var a) {
  Tape& t = *a.tape();
  Tensor out = a.value();
  for (double& x : out.raw()) x = std::tanh(x);
  const auto ai = a.id();
  const Tensor saved = out;
  return t.emit("tanh", std::move(out), t.needs_grad(a),
                [ai, saved](Tape& tp, const Tensor& g) {
                  Tensor ga(saved.shape());
                  for (std::size_t i = 0; i < g.size(); ++i) {
                    ga[i] = g[i] * (1.0 - saved[i] * saved[i]);
                  }
                  tp.accumulate(ai, ga);
                });
}

Var relu(Var a) {
  Tape& t = *a.tape();
  Tensor out = a.value();
  for (double& x : out.raw()) x = x > 0.0 ? x : 0.0;
  const auto ai = a.id();
  return t.emit("relu", std::move(out), t.needs_grad(a),
                [ai](Tape& tp, const Tensor& g) {
                  const Tensor& av = tp.value_of(ai);
                  Tensor ga(av.shape());
                  for (std::size_t i = 0; i < g.size(); ++i) {
                    ga[i] = av[i] > 0.0 ? g[i] : 0.0;
                  }
                  tp.accumulate(ai, ga);
                });
}

Var leaky_relu(Var a, double slope) {
  if (!(slope > 0.0 && slope < 1.0)) {
    throw ParameterError("leaky_relu: slope must lie in (0,1), got " +
                         std::to_string(slope));
  }
  Tape& t = *a.tape();
  Tensor out = a.value();
  for (double& x : out.raw()) x = x > 0.0 ? x : slope * x;
  const auto ai = a.id();
  return t.emit("leaky_relu", std::move(out), t.needs_grad(a),
                [ai, slope](Tape& tp, const Tensor& g) {
                  const Tensor& av = tp.value_of(ai);
                  Tensor ga(av.shape());
                  for (std::size_t i = 0; i < g.size(); ++i) {
                    ga[i] = av[i] > 0.0 ? g[i] : slope * g[i];
                  }
                  tp.accumulate(ai, ga);
                });
}

// ---- Softmax / layer norm ----

namespace {

// Decomposes shape into (outer, axis length, inner) strides around `axis`.
struct AxisSplit {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

Var softmax(Var a, std::size_t axis) {
  Tape& t = *a.tape();
  const Tensor& av = a.value();
  if (av.rank() == 0 || axis >= av.rank()) {
    throw ParameterError("softmax: invalid axis " + std::to_string(axis) +
                         " for shape " + shape_str(av.shape()));
  }
  if (av.dim(axis) == 0) throw ParameterError("softmax: empty axis");
  const AxisSplit s = split_axis(av.shape(), axis);
  Tensor out(av.shape());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.n * s.inner + in;
      double mx = av[base];
      for (std::size_t i = 1; i < s.n; ++i) {
        mx = std::max(mx, av[base + i * s.inner]);
      }
      double z = 0.0;
      for (std::size_t i = 0; i < s.n; ++i) {
        const double e = std::exp(av[base + i * s.inner] - mx);
        out[base + i * s.inner] = e;
        z += e;
      }
      for (std::size_t i = 0; i < s.n; ++i) out[base + i * s.inner] /= z;
    }
  }
  const auto ai = a.id();
  const Tensor saved = out;
  return t.emit("softmax", std::move(out), t.needs_grad(a),
                [ai, saved, s](Tape& tp, const Tensor& g) {
                  Tensor ga(saved.shape());
                  for (std::size_t o = 0; o < s.outer; ++o) {
                    for (std::size_t in = 0; in < s.inner; ++in) {
                      const std::size_t base = o * s.n * s.inner + in;
                      double dot = 0.0;
                      for (std::size_t i = 0; i < s.n; ++i) {
                        const std::size_t ix = base + i * s.inner;
                        dot += g[ix] * saved[ix];
                      }
                      for (std::size_t i = 0; i < s.n; ++i) {
                        const std::size_t ix = base + i * s.inner;
                        ga[ix] = saved[ix] * (g[ix] - dot);
                      }
                    }
                  }
                  tp.accumulate(ai, ga);
                });
}

Var softmax(Var a) { return softmax(a, a.value().rank() - 1); }

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  Tape& t = *x.tape();
  const Tensor& xv = x.value();
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  if (xv.rank() == 0) throw DimensionError("layer_norm: scalar input");
  const std::size_t d = xv.shape().back();
  if (gv.rank() != 1 || gv.size() != d || bv.rank() != 1 || bv.size() != d) {
    throw DimensionError("layer_norm: gain/bias must be [" +
                         std::to_string(d) + "], got " + shape_str(gv.shape()) +
                         " and " + shape_str(bv.shape()));
  }
  const std::size_t groups = xv.size() / d;
  Tensor out(xv.shape());
  Tensor xhat(xv.shape());
  std::vector<double> inv_std(groups);
  for (std::size_t gidx = 0; gidx < groups; ++gidx) {
    const std::size_t base = gidx * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xv[base + j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = xv[base + j] - mu;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[gidx] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const double xh = (xv[base + j] - mu) * is;
      xhat[base + j] = xh;
      out[base + j] = xh * gv[j] + bv[j];
    }
  }
  const bool ng = t.needs_grad(x) || t.needs_grad(gain) || t.needs_grad(bias);
  const auto xi = x.id(), gi = gain.id(), bi = bias.id();
  return t.emit(
      "layer_norm", std::move(out), ng,
      [xi, gi, bi, d, groups, xhat, inv_std](Tape& tp, const Tensor& g) {
        const Tensor& gv2 = tp.value_of(gi);
        Tensor gx(tp.value_of(xi).shape());
        Tensor ggain({d});
        Tensor gbias({d});
        const double dn = static_cast<double>(d);
        for (std::size_t gr = 0; gr < groups; ++gr) {
          const std::size_t base = gr * d;
          double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const double dxhat = g[base + j] * gv2[j];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat[base + j];
            ggain[j] += g[base + j] * xhat[base + j];
            gbias[j] += g[base + j];
          }
          for (std::size_t j = 0; j < d; ++j) {
            const double dxhat = g[base + j] * gv2[j];
            gx[base + j] = inv_std[gr] *
                           (dxhat - sum_dxhat / dn -
                            xhat[base + j] * sum_dxhat_xhat / dn);
          }
        }
        tp.accumulate(xi, gx);
        tp.accumulate(gi, ggain);
        tp.accumulate(bi, gbias);
      });
}

// ---- Convolutions ----

Var causal_conv1d(Var input, Var kernel, std::size_t dilation) {
  if (dilation == 0) {
    throw ParameterError("causal_conv1d: dilation must be positive");
  }
  Tape& t = common_tape(input, kernel, "causal_conv1d");
  const Tensor& iv = input.value();
  const Tensor& kv = kernel.value();
  require_rank(iv, 2, "causal_conv1d");
  require_rank(kv, 3, "causal_conv1d");
  const std::size_t T = iv.dim(0), cin = iv.dim(1);
  const std::size_t k = kv.dim(0), kcin = kv.dim(1), cout = kv.dim(2);
  if (cin != kcin) {
    throw DimensionError("causal_conv1d: input channels " +
                         std::to_string(cin) + " vs kernel channels " +
                         std::to_string(kcin));
  }
  if (T == 0) throw DimensionError("causal_conv1d: empty input");
  // out[t, co] = sum_{j, ci} kernel[j, ci, co] * input[t - (k-1-j)*dil, ci]
  Tensor out({T, cout});
  for (std::size_t tt = 0; tt < T; ++tt) {
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t back = (k - 1 - j) * dilation;
      if (back > tt) continue;
      const std::size_t src = tt - back;
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const double x = iv(src, ci);
        if (x == 0.0) continue;
        for (std::size_t co = 0; co < cout; ++co) {
          out(tt, co) += kv(j, ci, co) * x;
        }
      }
    }
  }
  const bool ng = t.needs_grad(input) || t.needs_grad(kernel);
  const auto ii = input.id(), ki = kernel.id();
  return t.emit(
      "causal_conv1d", std::move(out), ng,
      [ii, ki, T, cin, k, cout, dilation](Tape& tp, const Tensor& g) {
        const Tensor& iv2 = tp.value_of(ii);
        const Tensor& kv2 = tp.value_of(ki);
        Tensor gi({T, cin});
        Tensor gk({k, cin, cout});
        for (std::size_t tt = 0; tt < T; ++tt) {
          for (std::size_t j = 0; j < k; ++j) {
            const std::size_t back = (k - 1 - j) * dilation;
            if (back > tt) continue;
            const std::size_t src = tt - back;
            for (std::size_t ci = 0; ci < cin; ++ci) {
              double acc = 0.0;
              for (std::size_t co = 0; co < cout; ++co) {
                const double go = g(tt, co);
                acc += kv2(j, ci, co) * go;
                gk(j, ci, co) += go * iv2(src, ci);
              }
              gi(src, ci) += acc;
            }
          }
        }
        tp.accumulate(ii, gi);
        tp.accumulate(ki, gk);
      });
}

Var conv2d(Var input, Var kernel) {
  Tape& t = common_tape(input, kernel, "conv2d");
  const Tensor& iv = input.value();
  const Tensor& kv = kernel.value();
  require_rank(iv, 3, "conv2d");
  require_rank(kv, 4, "conv2d");
  const std::size_t cin = iv.dim(0), H = iv.dim(1), W = iv.dim(2);
  const std::size_t cout = kv.dim(0), kcin = kv.dim(1), kh = kv.dim(2),
                    kw = kv.dim(3);
  if (cin != kcin) {
    throw DimensionError("conv2d: input channels " + std::to_string(cin) +
                         " vs kernel channels " + std::to_string(kcin));
  }
  if (kh > H || kw > W) {
    throw DimensionError("conv2d: kernel " + std::to_string(kh) + "x" +
                         std::to_string(kw) + " larger than input " +
                         std::to_string(H) + "x" + std::to_string(W));
  }
  const std::size_t oh = H - kh + 1, ow = W - kw + 1;
  Tensor out({cout, oh, ow});
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        double s = 0.0;
        for (std::size_t ci = 0; ci < cin; ++ci) {
          for (std::size_t dy = 0; dy < kh; ++dy) {
            for (std::size_t dx = 0; dx < kw; ++dx) {
              s += kv(co, ci, dy, dx) * iv(ci, y + dy, x + dx);
            }
          }
        }
        out(co, y, x) = s;
      }
    }
  }
  const bool ng = t.needs_grad(input) || t.needs_grad(kernel);
  const auto ii = input.id(), ki = kernel.id();
  return t.emit(
      "conv2d", std::move(out), ng,
      [ii, ki, cin, H, W, cout, kh, kw, oh, ow](Tape& tp, const Tensor& g) {
        const Tensor& iv2 = tp.value_of(ii);
        const Tensor& kv2 = tp.value_of(ki);
        Tensor gi({cin, H, W});
        Tensor gk({cout, cin, kh, kw});
        for (std::size_t co = 0; co < cout; ++co) {
          for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
              const double go = g(co, y, x);
              if (go == 0.0) continue;
              for (std::size_t ci = 0; ci < cin; ++ci) {
                for (std::size_t dy = 0; dy < kh; ++dy) {
                  for (std::size_t dx = 0; dx < kw; ++dx) {
                    gi(ci, y + dy, x + dx) += go * kv2(co, ci, dy, dx);
                    gk(co, ci, dy, dx) += go * iv2(ci, y + dy, x + dx);
                  }
                }
              }
            }
          }
        }
        tp.accumulate(ii, gi);
        tp.accumulate(ki, gk);
      });
}

// ---- Dropout ----

Var dropout(Var a, double p, Rng& rng, bool training) {
  if (p < 0.0 || p >= 1.0) {
    throw ParameterError("dropout: p must lie in [0,1), got " +
                         std::to_string(p));
  }
  if (!training || p == 0.0) return a;
  Tape& t = *a.tape();
  const Tensor& av = a.value();
  Tensor mask(av.shape());
  const double keep = 1.0 - p;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = rng.uniform() < p ? 0.0 : 1.0 / keep;
  }
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * mask[i];
  const auto ai = a.id();
  return t.emit("dropout", std::move(out), t.needs_grad(a),
                [ai, mask](Tape& tp, const Tensor& g) {
                  Tensor ga(mask.shape());
                  for (std::size_t i = 0; i < g.size(); ++i) {
                    ga[i] = g[i] * mask[i];
                  }
                  tp.accumulate(ai, ga);
                });
}

}  // namespace forecast::ad

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "forecast/rng.hpp"
#include "forecast/tensor.hpp"

namespace forecast::ad {

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool defined() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Receives the output gradient and accumulates into the node's inputs.
using BackwardFn = std::function<void(Tape&, const Tensor&)>;

struct Node {
  const char* op = "";
  Tensor value;
  BackwardFn backward;     // empty when no input needs a gradient
  bool needs_grad = false;
  bool is_leaf = false;
};

// Gradients per requires-grad leaf, produced by one backward pass.
class Gradients {
 public:
  const Tensor* find(const Var& v) const;
  const Tensor& at(const Var& v) const;
  std::size_t count() const { return leaf_ids_.size(); }
  bool empty() const { return leaf_ids_.empty(); }

 private:
  friend class Tape;
  std::vector<std::uint32_t> leaf_ids_;  // sorted
  std::vector<Tensor> tensors_;
};

// Ordered record of primitive applications. Nodes are appended in creation
// order, so every node's inputs precede it by construction.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf whose gradient is requested iff requires_grad (defaults to the
  // tensor's own flag).
  Var leaf(Tensor value);
  Var leaf(Tensor value, bool requires_grad);
  Var constant(Tensor value) { return leaf(std::move(value), false); }
  Var constant(double v) { return leaf(Tensor::scalar(v), false); }

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t id) const { return nodes_[id]; }
  bool needs_grad(const Var& v) const { return nodes_[v.id()].needs_grad; }

  // Reverse topological accumulation from a scalar loss. Repeatable: the
  // same tape yields identical gradients on every call.
  Gradients backward(const Var& loss);

  // Op plumbing.
  Var emit(const char* op, Tensor value, bool needs_grad, BackwardFn backward);
  void accumulate(std::size_t node_id, const Tensor& grad);
  void accumulate_at(std::size_t node_id, std::size_t flat_index, double g);
  const Tensor& value_of(std::size_t node_id) const {
    return nodes_[node_id].value;
  }

 private:
  std::vector<Node> nodes_;
  std::vector<Tensor> grad_;
  std::vector<char> has_grad_;
};

// Binds model parameters to tape leaves and remembers the association so a
// trainer can route gradients back.
struct Parameter {
  std::string name;
  Tensor value;
};

class Binder {
 public:
  explicit Binder(Tape& tape, bool with_grad = true)
      : tape_(&tape), with_grad_(with_grad) {}

  Var operator()(Parameter& p) {
    Var v = tape_->leaf(p.value, with_grad_);
    bound_.push_back({&p, v});
    return v;
  }

  const std::vector<std::pair<Parameter*, Var>>& bound() const {
    return bound_;
  }
  Tape& tape() { return *tape_; }
  bool with_grad() const { return with_grad_; }

 private:
  Tape* tape_;
  bool with_grad_;
  std::vector<std::pair<Parameter*, Var>> bound_;
};

// ---- Elementwise and reduction primitives ----

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);           // Hadamard
Var scale(Var a, double c);
Var neg(Var a);
Var scale_by(Var a, Var s);      // a * scalar-var s
Var div_by(Var a, Var s);        // a / scalar-var s
Var sqrt(Var a);
Var sum(Var a);                  // -> scalar
Var mean(Var a);                 // -> scalar
Var mse(Var pred, Var target);   // mean squared error -> scalar

// ---- Shape primitives ----

Var reshape(Var a, Shape shape);
Var transpose(Var a);                  // 2-D
Var row(Var a, std::size_t i);         // 2-D -> 1-D
Var element(Var a, std::size_t i);     // flat index -> scalar
Var slice_vec(Var a, std::size_t start, std::size_t len);  // 1-D slice
Var stack_rows(std::span<const Var> rows);  // k x [n] -> [k x n]
Var concat(std::span<const Var> parts);     // 1-D concat

// ---- Linear algebra ----

Var matmul(Var a, Var b);        // [m x k] * [k x n]
Var matvec(Var a, Var x);        // [m x k] * [k]
Var add_rowwise(Var x, Var b);   // [m x n] + broadcast [n]

inline Var dot(Var a, Var b) { return sum(mul(a, b)); }

// Per-output-channel weight normalization: for the last-axis slice co,
// w[..., co] = g[co] * v[..., co] / ||v[..., co]||.
Var weight_norm(Var v, Var g);

// ---- Activations ----

enum class Activation { kSigmoid, kTanh, kRelu, kLeakyRelu };

Activation activation_from_string(const std::string& name);

Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var leaky_relu(Var a, double slope);
Var activate(Var a, Activation kind, double slope = 0.01);

// ---- Normalization and attention support ----

Var softmax(Var a, std::size_t axis);
Var softmax(Var a);  // last axis
Var layer_norm(Var x, Var gain, Var bias, double eps);

// ---- Convolutions ----

// input [T x C_in], kernel [k x C_in x C_out]; left zero-padding of
// (k-1)*dilation keeps output length T and output at t a function of
// inputs at times <= t only. kernel[0] is the oldest tap.
Var causal_conv1d(Var input, Var kernel, std::size_t dilation);

// input [C_in x H x W], kernel [C_out x C_in x kh x kw], valid padding.
Var conv2d(Var input, Var kernel);

// ---- Regularization ----

// Inverted dropout; identity when !training. Mask drawn from rng.
Var dropout(Var a, double p, Rng& rng, bool training);

}  // namespace forecast::ad

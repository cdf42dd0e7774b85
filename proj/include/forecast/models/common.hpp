#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "forecast/autodiff.hpp"
#include "forecast/graph.hpp"
#include "forecast/pipeline.hpp"
#include "forecast/rng.hpp"
#include "forecast/tensor.hpp"

namespace forecast::models {

using ad::Binder;
using ad::Parameter;
using ad::Tape;
using ad::Var;

// Deterministic seeded initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in))
// for weights, zeros for biases.
Tensor init_weight(Shape shape, std::size_t fan_in, Rng& rng);
Parameter make_weight(std::string name, Shape shape, std::size_t fan_in,
                      Rng& rng);
Parameter make_bias(std::string name, std::size_t width);

// One (window, target) pair with everything a forecaster may consume.
// Model inputs are normalized; the meter-space fields feed evaluation.
struct Sample {
  Tensor history_norm;     // [H x N x F]
  Tensor target_pos_norm;  // [P x 2] target positions (normalized channels)
  Tensor target_vel_norm;  // [P x 2] target velocities
  Tensor context;          // [H x 8]: velocity, nearest, hoop1, hoop2 pairs
  data::SceneGraph graph;  // built at the last history frame
  std::size_t target = 0;  // object column in the scene tensors

  std::array<double, 2> last_pos_m{0.0, 0.0};
  std::array<double, 2> last_vel_m{0.0, 0.0};
  Tensor target_pos_m;  // [P x 2] ground truth, meters
  double dt = data::kFrameDt;

  // Channel indexes into the window feature axis.
  std::size_t ch_px = 0, ch_py = 1, ch_vx = 2, ch_vy = 3;

  std::size_t history_steps() const { return history_norm.dim(0); }
  std::size_t objects() const { return history_norm.dim(1); }
  std::size_t forecast_steps() const { return target_pos_m.dim(0); }
};

enum class OutputKind { kVelocities, kPositions };

// Common forecaster contract. predict() builds the model's graph for one
// sample and returns the native [P x 2] output in normalized space;
// predict_positions_m() is the evaluation path to meters, including the
// velocity-integration postprocessing step.
class Forecaster {
 public:
  virtual ~Forecaster() = default;

  const std::string& name() const { return name_; }
  virtual bool trainable() const { return true; }
  virtual OutputKind output() const = 0;
  virtual std::vector<Parameter*> parameters() = 0;

  virtual Var predict(Binder& binder, const Sample& sample, bool training,
                      Rng* dropout_rng) = 0;

  // MSE target in normalized space, matching the native output kind.
  const Tensor& native_target(const Sample& sample) const;

  virtual Tensor predict_positions_m(const Sample& sample,
                                     const data::NormStats& stats);

  std::size_t parameter_count();

 protected:
  explicit Forecaster(std::string name) : name_(std::move(name)) {}
  std::string name_;
};

// Denormalizes a [P x 2] pair tensor with the given channel statistics.
Tensor denorm_pair(const Tensor& pair, const data::NormStats& stats,
                   std::size_t ch_x, std::size_t ch_y);

// Slices per-step model inputs out of the normalized scene tensor.
// Channel pairs are ordered by object, then (x, y).
Tensor scene_feature_rows(const Tensor& history, std::size_t ch_x,
                          std::size_t ch_y);           // [H x 2N]
Tensor scene_pos_vel_rows(const Tensor& history, const Sample& s);  // [H x 4N]

}  // namespace forecast::models

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "forecast/data.hpp"
#include "forecast/rng.hpp"

namespace forecast::data {

// ---- Resampling and feature derivation ----

// Linear interpolation of positions onto the 0.04 s grid. Gaps longer than
// kMaxGapSeconds split a game into separate series instead of being
// interpolated across.
std::vector<FrameSeries> resample_uniform(const RawGame& game,
                                          PipelineCounters* counters = nullptr);

// Appends v_x, v_y with v[t] = (pos[t] - pos[t-1]) / dt and v[0] = v[1].
FrameSeries derive_velocities(const FrameSeries& series);

// ---- Splits ----

enum class SplitPolicy { kRandomWithinTeam, kByGame, kByTeam };

SplitPolicy split_policy_from_string(const std::string& name);
std::string to_string(SplitPolicy policy);

struct SplitResult {
  std::vector<FrameSeries> train;
  std::vector<FrameSeries> validation;
  std::vector<FrameSeries> test;
};

// ratios = (train, validation, test), must sum to 1. by_game keeps whole
// games together; by_team keeps whole teams together; random_within_team
// shuffles series, optionally restricted to `team_filter`.
SplitResult split_dataset(std::span<const FrameSeries> series,
                          SplitPolicy policy,
                          const std::array<double, 3>& ratios, Rng& rng,
                          const std::string& team_filter = "");

// ---- Normalization ----

// Per-feature-channel z-score, fitted on the training split only.
struct NormStats {
  std::vector<std::string> feature_names;
  std::vector<double> mean;
  std::vector<double> stddev;

  // Tensors shaped [... x F]; the last axis is the feature channel.
  Tensor apply(const Tensor& t) const;
  Tensor invert(const Tensor& t) const;

  double apply_one(double v, std::size_t channel) const {
    return (v - mean[channel]) / stddev[channel];
  }
  double invert_one(double v, std::size_t channel) const {
    return v * stddev[channel] + mean[channel];
  }
};

// ---- Windows ----

struct Window {
  Tensor history;   // [H x N x F], meters and m/s
  Tensor target;    // [P x N x F]
  Tensor last_pos;  // [N x 2], positions at the final history frame
  std::size_t series_index = 0;
  std::size_t start = 0;  // start frame within the series
};

struct WindowSet {
  std::vector<Window> windows;
  std::size_t history_steps = 0;
  std::size_t forecast_steps = 0;
  std::size_t stride = 1;
  double dt = kFrameDt;
  std::vector<std::string> feature_names;
  std::optional<NormStats> stats;

  std::size_t size() const { return windows.size(); }
};

WindowSet make_windows(std::span<const FrameSeries> series,
                       std::size_t history_steps, std::size_t forecast_steps,
                       std::size_t stride = 1,
                       PipelineCounters* counters = nullptr);

NormStats fit_normalizer(const WindowSet& train_windows);

// ---- Context features (Eq.-style distance transform) ----

// f(x) = sgn(x) * 2 * exp(-|x| / 2); odd, bounded by (-2, 2], sgn(0) = 0.
double distance_transform(double x);

// Per target object and timestep: transformed per-axis offsets to the
// nearest other object (ties broken by lowest object id) and to both hoops.
struct ContextFeatures {
  Tensor nearest;  // [T x 2]
  Tensor hoop1;    // [T x 2]
  Tensor hoop2;    // [T x 2]
  std::vector<std::size_t> nearest_index;  // chosen neighbor per timestep
};

ContextFeatures context_features(const FrameSeries& series, std::size_t target,
                                 const CourtSpec& court);

}  // namespace forecast::data

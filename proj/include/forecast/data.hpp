#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "forecast/tensor.hpp"

namespace forecast::data {

inline constexpr double kFrameDt = 0.04;  // 25 Hz grid
inline constexpr double kFeetToMeters = 0.3048;
inline constexpr double kMaxGapSeconds = 0.5;
inline constexpr std::size_t kNbaObjects = 11;  // 10 players + ball
inline constexpr long long kBallTeamId = -1;

// Court geometry in meters; the two hoops are the fixed landmarks used by
// the context features.
struct CourtSpec {
  double length_m = 94.0 * kFeetToMeters;
  double width_m = 50.0 * kFeetToMeters;
  std::array<std::array<double, 2>, 2> hoops{{
      {5.25 * kFeetToMeters, 25.0 * kFeetToMeters},
      {88.75 * kFeetToMeters, 25.0 * kFeetToMeters},
  }};

  static CourtSpec nba() { return CourtSpec{}; }
};

struct MomentObject {
  long long object_id = 0;
  long long team_id = 0;
  double x = 0.0;  // meters
  double y = 0.0;  // meters
};

struct Moment {
  double t = 0.0;  // seconds, non-decreasing within a game
  std::vector<MomentObject> objects;
  bool valid = true;  // false when the object set does not match the game's
};

// Raw tracking data for one game, in meters, before resampling.
struct RawGame {
  std::string game_id;
  std::string home_team;
  std::string away_team;
  CourtSpec court;
  std::vector<Moment> moments;
  // Canonical object set (the most frequent per-moment set), sorted by id.
  std::vector<long long> object_ids;
  std::vector<long long> team_ids;  // parallel to object_ids
  std::size_t flagged_moments = 0;
};

// Uniformly sampled scene tensor [T x N x F] with timestamps.
struct FrameSeries {
  std::string game_id;
  std::string team_label;  // home team; drives by_team splits
  std::vector<double> times;
  Tensor values;  // [T x N x F]
  std::vector<std::string> feature_names;  // pos_x, pos_y (+ v_x, v_y)
  std::vector<long long> object_ids;
  std::vector<long long> team_ids;
  double dt = kFrameDt;

  std::size_t frames() const { return times.size(); }
  std::size_t objects() const { return object_ids.size(); }
  std::size_t features() const { return feature_names.size(); }
  bool has_velocities() const;
  std::size_t feature_index(const std::string& name) const;  // throws
};

// Counters for dropped/flagged inputs; shared across pipeline stages.
struct PipelineCounters {
  std::size_t flagged_moments = 0;
  std::size_t gap_splits = 0;
  std::size_t dropped_spans = 0;
  std::size_t short_series = 0;  // too short for one window
};

}  // namespace forecast::data

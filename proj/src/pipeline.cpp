#include "forecast/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "forecast/errors.hpp"

namespace forecast::data {

bool FrameSeries::has_velocities() const {
  return std::find(feature_names.begin(), feature_names.end(), "v_x") !=
         feature_names.end();
}

std::size_t FrameSeries::feature_index(const std::string& name) const {
  const auto it =
      std::find(feature_names.begin(), feature_names.end(), name);
  if (it == feature_names.end()) {
    throw ParameterError("series has no feature '" + name + "'");
  }
  return static_cast<std::size_t>(it - feature_names.begin());
}

// ---- Resampling ----

std::vector<FrameSeries> resample_uniform(const RawGame& game,
                                          PipelineCounters* counters) {
  PipelineCounters local;
  PipelineCounters& c = counters ? *counters : local;
  c.flagged_moments += game.flagged_moments;

  // Valid moments only; invalid ones break spans like time gaps do.
  std::vector<const Moment*> valid;
  for (const auto& m : game.moments) {
    if (m.valid) valid.push_back(&m);
  }

  std::vector<std::pair<std::size_t, std::size_t>> spans;  // [first, last]
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= valid.size(); ++i) {
    const bool gap = i == valid.size() ||
                     valid[i]->t - valid[i - 1]->t > kMaxGapSeconds;
    if (!gap) continue;
    if (i < valid.size()) ++c.gap_splits;
    if (i - begin >= 2) {
      spans.emplace_back(begin, i - 1);
    } else {
      ++c.dropped_spans;
    }
    begin = i;
  }

  const std::size_t n = game.object_ids.size();
  std::vector<FrameSeries> out;
  int span_no = 0;
  for (const auto& [s0, s1] : spans) {
    FrameSeries fs;
    fs.game_id = game.game_id;
    fs.team_label = game.home_team;
    fs.object_ids = game.object_ids;
    fs.team_ids = game.team_ids;
    fs.feature_names = {"pos_x", "pos_y"};
    const double t0 = valid[s0]->t;
    const double t1 = valid[s1]->t;
    const auto frames =
        static_cast<std::size_t>(std::floor((t1 - t0) / kFrameDt + 1e-9)) + 1;
    fs.times.resize(frames);
    fs.values = Tensor({frames, n, 2});

    std::size_t j = s0;  // left bracket, advances monotonically
    for (std::size_t f = 0; f < frames; ++f) {
      const double tg = t0 + static_cast<double>(f) * kFrameDt;
      fs.times[f] = tg;
      while (j + 1 <= s1 && valid[j + 1]->t <= tg + 1e-9) ++j;
      const Moment& a = *valid[j];
      // Snap to exact samples so already-uniform input passes through
      // untouched.
      if (std::fabs(a.t - tg) < 1e-9 || j == s1) {
        for (std::size_t o = 0; o < n; ++o) {
          fs.values(f, o, 0) = a.objects[o].x;
          fs.values(f, o, 1) = a.objects[o].y;
        }
        continue;
      }
      const Moment& b = *valid[j + 1];
      const double w = (tg - a.t) / (b.t - a.t);
      for (std::size_t o = 0; o < n; ++o) {
        fs.values(f, o, 0) = a.objects[o].x + w * (b.objects[o].x - a.objects[o].x);
        fs.values(f, o, 1) = a.objects[o].y + w * (b.objects[o].y - a.objects[o].y);
      }
    }
    if (spans.size() > 1) {
      fs.game_id += "#" + std::to_string(span_no);
    }
    ++span_no;
    out.push_back(std::move(fs));
  }
  return out;
}

FrameSeries derive_velocities(const FrameSeries& series) {
  const std::size_t px = series.feature_index("pos_x");
  const std::size_t py = series.feature_index("pos_y");
  const std::size_t T = series.frames();
  const std::size_t N = series.objects();
  const std::size_t F = series.features();

  FrameSeries out = series;
  out.feature_names.push_back("v_x");
  out.feature_names.push_back("v_y");
  out.values = Tensor({T, N, F + 2});
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t o = 0; o < N; ++o) {
      for (std::size_t f = 0; f < F; ++f) {
        out.values(t, o, f) = series.values(t, o, f);
      }
      if (t > 0) {
        out.values(t, o, F) =
            (series.values(t, o, px) - series.values(t - 1, o, px)) / series.dt;
        out.values(t, o, F + 1) =
            (series.values(t, o, py) - series.values(t - 1, o, py)) / series.dt;
      }
    }
  }
  // v[0] copies v[1]; a window start is not a standstill.
  if (T >= 2) {
    for (std::size_t o = 0; o < N; ++o) {
      out.values(0, o, F) = out.values(1, o, F);
      out.values(0, o, F + 1) = out.values(1, o, F + 1);
    }
  }
  return out;
}

// ---- Splits ----

SplitPolicy split_policy_from_string(const std::string& name) {
  if (name == "random_within_team") return SplitPolicy::kRandomWithinTeam;
  if (name == "by_game") return SplitPolicy::kByGame;
  if (name == "by_team") return SplitPolicy::kByTeam;
  throw ParameterError("unknown split policy: " + name);
}

std::string to_string(SplitPolicy policy) {
  switch (policy) {
    case SplitPolicy::kRandomWithinTeam:
      return "random_within_team";
    case SplitPolicy::kByGame:
      return "by_game";
    case SplitPolicy::kByTeam:
      return "by_team";
  }
  return "?";
}

namespace {

// Largest-remainder apportionment of `total` units over 3 ratio buckets.
std::array<std::size_t, 3> apportion(std::size_t total,
                                     const std::array<double, 3>& ratios) {
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double q = ratios[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(q + 1e-9));
    remainders[i] = q - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  while (assigned < total) {
    int best = 0;
    for (int i = 1; i < 3; ++i) {
      if (remainders[i] > remainders[best] + 1e-12) best = i;
    }
    ++counts[best];
    remainders[best] = -1.0;
    ++assigned;
  }
  return counts;
}

void check_ratios(const std::array<double, 3>& ratios) {
  double s = 0.0;
  for (double r : ratios) {
    if (r < 0.0) throw ConfigError("split ratios must be non-negative");
    s += r;
  }
  if (std::fabs(s - 1.0) > 1e-9) {
    throw ConfigError("split ratios must sum to 1, got " + std::to_string(s));
  }
}

}  // namespace

SplitResult split_dataset(std::span<const FrameSeries> series,
                          SplitPolicy policy,
                          const std::array<double, 3>& ratios, Rng& rng,
                          const std::string& team_filter) {
  check_ratios(ratios);
  SplitResult result;

  auto series_pool = [&]() {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < series.size(); ++i) {
      if (team_filter.empty() || series[i].team_label == team_filter) {
        idx.push_back(i);
      }
    }
    return idx;
  };

  auto place = [&](std::span<const std::size_t> idx,
                   const std::array<std::size_t, 3>& counts) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < counts[0]; ++i) result.train.push_back(series[idx[k++]]);
    for (std::size_t i = 0; i < counts[1]; ++i) result.validation.push_back(series[idx[k++]]);
    for (std::size_t i = 0; i < counts[2]; ++i) result.test.push_back(series[idx[k++]]);
  };

  if (policy == SplitPolicy::kRandomWithinTeam) {
    std::vector<std::size_t> idx = series_pool();
    if (idx.empty()) throw ConfigError("no series match the split filter");
    rng.shuffle(idx);
    place(idx, apportion(idx.size(), ratios));
    return result;
  }

  // Group by game or team, shuffle groups, apportion whole groups.
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i : series_pool()) {
    const std::string key = policy == SplitPolicy::kByGame
                                ? series[i].game_id
                                : series[i].team_label;
    // Gap-split spans of one game share the split of their parent game.
    std::string base = key;
    if (policy == SplitPolicy::kByGame) {
      const auto hash_pos = base.find('#');
      if (hash_pos != std::string::npos) base = base.substr(0, hash_pos);
    }
    groups[base].push_back(i);
  }
  std::vector<std::string> keys;
  keys.reserve(groups.size());
  for (const auto& [k, v] : groups) keys.push_back(k);

  const auto counts = apportion(keys.size(), ratios);
  for (int b = 0; b < 3; ++b) {
    if (ratios[b] > 1e-12 && counts[b] == 0) {
      throw ConfigError("too few " +
                        std::string(policy == SplitPolicy::kByGame ? "games"
                                                                   : "teams") +
                        " (" + std::to_string(keys.size()) +
                        ") to honor the split policy");
    }
  }
  rng.shuffle(keys);
  std::size_t k = 0;
  for (int b = 0; b < 3; ++b) {
    for (std::size_t i = 0; i < counts[b]; ++i) {
      for (std::size_t si : groups[keys[k]]) {
        auto& bucket = b == 0 ? result.train
                              : (b == 1 ? result.validation : result.test);
        bucket.push_back(series[si]);
      }
      ++k;
    }
  }
  return result;
}

// ---- Normalization ----

Tensor NormStats::apply(const Tensor& t) const {
  const std::size_t F = mean.size();
  if (t.rank() == 0 || t.shape().back() != F) {
    throw DimensionError("normalize: last axis must be " + std::to_string(F) +
                         " channels, got " + shape_str(t.shape()));
  }
  Tensor out = t;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = apply_one(out[i], i % F);
  }
  return out;
}

Tensor NormStats::invert(const Tensor& t) const {
  const std::size_t F = mean.size();
  if (t.rank() == 0 || t.shape().back() != F) {
    throw DimensionError("denormalize: last axis must be " +
                         std::to_string(F) + " channels, got " +
                         shape_str(t.shape()));
  }
  Tensor out = t;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = invert_one(out[i], i % F);
  }
  return out;
}

NormStats fit_normalizer(const WindowSet& train_windows) {
  if (train_windows.windows.empty()) {
    throw ConfigError("fit_normalizer: no training windows");
  }
  const std::size_t F = train_windows.feature_names.size();
  std::vector<double> sum(F, 0.0);
  std::size_t count = 0;
  for (const auto& w : train_windows.windows) {
    for (const Tensor* t : {&w.history, &w.target}) {
      for (std::size_t i = 0; i < t->size(); ++i) sum[i % F] += (*t)[i];
      count += t->size() / F;
    }
  }

  NormStats stats;
  stats.feature_names = train_windows.feature_names;
  stats.mean.resize(F);
  stats.stddev.resize(F);
  for (std::size_t f = 0; f < F; ++f) {
    stats.mean[f] = sum[f] / static_cast<double>(count);
  }

  // Second pass over squared deviations; the one-pass formula cancels badly
  // when a channel is near-constant.
  std::vector<double> sq(F, 0.0);
  for (const auto& w : train_windows.windows) {
    for (const Tensor* t : {&w.history, &w.target}) {
      for (std::size_t i = 0; i < t->size(); ++i) {
        const double c = (*t)[i] - stats.mean[i % F];
        sq[i % F] += c * c;
      }
    }
  }
  for (std::size_t f = 0; f < F; ++f) {
    stats.stddev[f] = std::sqrt(sq[f] / static_cast<double>(count));
    if (!(stats.stddev[f] > 0.0)) {
      throw ConfigError("fit_normalizer: feature '" +
                        train_windows.feature_names[f] +
                        "' has zero variance");
    }
  }
  return stats;
}

// ---- Windows ----

WindowSet make_windows(std::span<const FrameSeries> series,
                       std::size_t history_steps, std::size_t forecast_steps,
                       std::size_t stride, PipelineCounters* counters) {
  if (history_steps == 0 || forecast_steps == 0 || stride == 0) {
    throw ParameterError("make_windows: H, P and stride must be positive");
  }
  WindowSet set;
  set.history_steps = history_steps;
  set.forecast_steps = forecast_steps;
  set.stride = stride;

  for (std::size_t si = 0; si < series.size(); ++si) {
    const FrameSeries& fs = series[si];
    if (set.feature_names.empty()) {
      set.feature_names = fs.feature_names;
      set.dt = fs.dt;
    } else if (set.feature_names != fs.feature_names) {
      throw ConfigError("make_windows: series disagree on feature channels");
    }
    const std::size_t T = fs.frames();
    const std::size_t need = history_steps + forecast_steps;
    if (T < need) {
      if (counters) ++counters->short_series;
      continue;
    }
    const std::size_t N = fs.objects();
    const std::size_t F = fs.features();
    const std::size_t px = fs.feature_index("pos_x");
    const std::size_t py = fs.feature_index("pos_y");
    const std::size_t last = T - need;
    for (std::size_t start = 0; start <= last; start += stride) {
      Window w;
      w.series_index = si;
      w.start = start;
      w.history = Tensor({history_steps, N, F});
      w.target = Tensor({forecast_steps, N, F});
      for (std::size_t t = 0; t < history_steps; ++t) {
        for (std::size_t o = 0; o < N; ++o) {
          for (std::size_t f = 0; f < F; ++f) {
            w.history(t, o, f) = fs.values(start + t, o, f);
          }
        }
      }
      for (std::size_t t = 0; t < forecast_steps; ++t) {
        for (std::size_t o = 0; o < N; ++o) {
          for (std::size_t f = 0; f < F; ++f) {
            w.target(t, o, f) = fs.values(start + history_steps + t, o, f);
          }
        }
      }
      w.last_pos = Tensor({N, 2});
      for (std::size_t o = 0; o < N; ++o) {
        w.last_pos(o, 0) = fs.values(start + history_steps - 1, o, px);
        w.last_pos(o, 1) = fs.values(start + history_steps - 1, o, py);
      }
      set.windows.push_back(std::move(w));
    }
  }
  return set;
}

// ---- Context features ----

double distance_transform(double x) {
  if (x == 0.0) return 0.0;
  const double s = x > 0.0 ? 1.0 : -1.0;
  return s * 2.0 * std::exp(-0.5 * std::fabs(x));
}

ContextFeatures context_features(const FrameSeries& series, std::size_t target,
                                 const CourtSpec& court) {
  const std::size_t N = series.objects();
  if (N < 2) {
    throw ConfigError("context_features: need at least 2 objects");
  }
  if (target >= N) {
    throw ParameterError("context_features: target index " +
                         std::to_string(target) + " out of " +
                         std::to_string(N));
  }
  const std::size_t T = series.frames();
  const std::size_t px = series.feature_index("pos_x");
  const std::size_t py = series.feature_index("pos_y");

  ContextFeatures ctx;
  ctx.nearest = Tensor({T, 2});
  ctx.hoop1 = Tensor({T, 2});
  ctx.hoop2 = Tensor({T, 2});
  ctx.nearest_index.resize(T);

  for (std::size_t t = 0; t < T; ++t) {
    const double tx = series.values(t, target, px);
    const double ty = series.values(t, target, py);

    // Nearest other object by Euclidean distance; ties go to the lowest
    // object id (columns are already sorted by id).
    std::size_t best = target == 0 ? 1 : 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t o = 0; o < N; ++o) {
      if (o == target) continue;
      const double dx = series.values(t, o, px) - tx;
      const double dy = series.values(t, o, py) - ty;
      const double d2 = dx * dx + dy * dy;
      if (d2 < best_d2 - 1e-15) {
        best_d2 = d2;
        best = o;
      }
    }
    ctx.nearest_index[t] = best;
    ctx.nearest(t, 0) = distance_transform(series.values(t, best, px) - tx);
    ctx.nearest(t, 1) = distance_transform(series.values(t, best, py) - ty);
    ctx.hoop1(t, 0) = distance_transform(court.hoops[0][0] - tx);
    ctx.hoop1(t, 1) = distance_transform(court.hoops[0][1] - ty);
    ctx.hoop2(t, 0) = distance_transform(court.hoops[1][0] - tx);
    ctx.hoop2(t, 1) = distance_transform(court.hoops[1][1] - ty);
  }
  return ctx;
}

}  // namespace forecast::data

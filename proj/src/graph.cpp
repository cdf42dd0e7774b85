#include "forecast/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "forecast/errors.hpp"

namespace forecast::data {

GraphRule graph_rule_from_string(const std::string& name) {
  if (name == "fully_connected") return GraphRule::kFullyConnected;
  if (name == "knn") return GraphRule::kKnn;
  throw ParameterError("unknown graph rule: " + name);
}

SceneGraph build_graph(const FrameSeries& series, std::size_t t,
                       GraphRule rule, std::size_t k) {
  const std::size_t N = series.objects();
  if (N < 2) throw ConfigError("build_graph: need at least 2 nodes");
  if (t >= series.frames()) {
    throw ParameterError("build_graph: frame " + std::to_string(t) +
                         " out of " + std::to_string(series.frames()));
  }
  if (rule == GraphRule::kKnn && (k == 0 || k >= N)) {
    throw ParameterError("build_graph: knn k must lie in [1, N), got " +
                         std::to_string(k));
  }

  const std::size_t px = series.feature_index("pos_x");
  const std::size_t py = series.feature_index("pos_y");
  const bool has_vel = series.has_velocities();
  const std::size_t vx = has_vel ? series.feature_index("v_x") : 0;
  const std::size_t vy = has_vel ? series.feature_index("v_y") : 0;

  // Team one-hot over the distinct team ids of the scene, sorted.
  std::set<long long> teams(series.team_ids.begin(), series.team_ids.end());
  std::vector<long long> team_order(teams.begin(), teams.end());

  SceneGraph g;
  g.team_width = team_order.size();
  g.node_features = Tensor({N, 4 + g.team_width});
  for (std::size_t o = 0; o < N; ++o) {
    g.node_features(o, 0) = series.values(t, o, px);
    g.node_features(o, 1) = series.values(t, o, py);
    g.node_features(o, 2) = has_vel ? series.values(t, o, vx) : 0.0;
    g.node_features(o, 3) = has_vel ? series.values(t, o, vy) : 0.0;
    const auto it = std::find(team_order.begin(), team_order.end(),
                              series.team_ids[o]);
    g.node_features(o, 4 + static_cast<std::size_t>(it - team_order.begin())) = 1.0;
  }

  auto dist = [&](std::size_t a, std::size_t b) {
    const double dx = series.values(t, a, px) - series.values(t, b, px);
    const double dy = series.values(t, a, py) - series.values(t, b, py);
    return std::sqrt(dx * dx + dy * dy);
  };

  if (rule == GraphRule::kFullyConnected) {
    for (std::size_t s = 0; s < N; ++s) {
      for (std::size_t d = 0; d < N; ++d) {
        if (s == d) continue;
        g.edges.emplace_back(static_cast<int>(s), static_cast<int>(d));
        g.edge_features.push_back(dist(s, d));
      }
    }
    return g;
  }

  for (std::size_t s = 0; s < N; ++s) {
    std::vector<std::size_t> order;
    for (std::size_t d = 0; d < N; ++d) {
      if (d != s) order.push_back(d);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       const double da = dist(s, a), db = dist(s, b);
                       if (da != db) return da < db;
                       return a < b;  // ties to the lowest id
                     });
    for (std::size_t i = 0; i < k; ++i) {
      g.edges.emplace_back(static_cast<int>(s), static_cast<int>(order[i]));
      g.edge_features.push_back(dist(s, order[i]));
    }
  }
  return g;
}

}  // namespace forecast::data

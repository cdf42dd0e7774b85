#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "forecast/data.hpp"

namespace forecast::data {

enum class GraphRule { kFullyConnected, kKnn };

GraphRule graph_rule_from_string(const std::string& name);

// Per-timestep scene graph. Edges are ordered (source, target) pairs; a GAT
// layer aggregates into each target from its sources.
struct SceneGraph {
  Tensor node_features;                    // [N x (4 + teams)]
  std::vector<std::pair<int, int>> edges;  // directed, no self loops
  std::vector<double> edge_features;       // inter-node distance, meters
  std::size_t team_width = 0;

  std::size_t nodes() const { return node_features.dim(0); }
};

// Node features are (pos_x, pos_y, v_x, v_y, team one-hot) at frame `t`.
// fully_connected emits all N(N-1) directed edges; knn(k) emits k outgoing
// edges per node toward its k nearest neighbors.
SceneGraph build_graph(const FrameSeries& series, std::size_t t,
                       GraphRule rule, std::size_t k = 0);

}  // namespace forecast::data

#include <doctest.h>

#include <cmath>

#include "forecast/errors.hpp"
#include "forecast/graph.hpp"
#include "forecast/pipeline.hpp"

using namespace forecast;
using namespace forecast::data;

namespace {

FrameSeries scene(std::size_t N) {
  FrameSeries fs;
  fs.game_id = "g";
  fs.feature_names = {"pos_x", "pos_y"};
  fs.object_ids.resize(N);
  fs.team_ids.resize(N);
  fs.times = {0.0, 0.04};
  fs.values = Tensor({2, N, 2});
  for (std::size_t o = 0; o < N; ++o) {
    fs.object_ids[o] = static_cast<long long>(o);
    fs.team_ids[o] = o + 1 == N ? -1 : (o < N / 2 ? 10 : 20);
    fs.values(0, o, 0) = static_cast<double>(o);
    fs.values(0, o, 1) = static_cast<double>(o % 3);
    fs.values(1, o, 0) = static_cast<double>(o) + 0.1;
    fs.values(1, o, 1) = static_cast<double>(o % 3);
  }
  return fs;
}

}  // namespace

TEST_CASE("fully connected graph over 11 objects has 110 edges") {
  FrameSeries fs = derive_velocities(scene(11));
  SceneGraph g = build_graph(fs, 0, GraphRule::kFullyConnected);
  CHECK(g.edges.size() == 110);
  for (const auto& [s, d] : g.edges) {
    CHECK(s != d);
    CHECK(s >= 0);
    CHECK(d < 11);
  }
  CHECK(g.edge_features.size() == 110);
}

TEST_CASE("knn(1) links each node to its nearest neighbor") {
  FrameSeries fs = scene(3);
  fs.values(0, 0, 0) = 0.0;
  fs.values(0, 1, 0) = 1.0;
  fs.values(0, 2, 0) = 10.0;
  for (std::size_t o = 0; o < 3; ++o) fs.values(0, o, 1) = 0.0;
  SceneGraph g = build_graph(fs, 0, GraphRule::kKnn, 1);
  REQUIRE(g.edges.size() == 3);
  CHECK(g.edges[0] == std::pair<int, int>(0, 1));
  CHECK(g.edges[1] == std::pair<int, int>(1, 0));
  CHECK(g.edges[2] == std::pair<int, int>(2, 1));
}

TEST_CASE("node feature width is 4 plus the team encoding") {
  FrameSeries fs = derive_velocities(scene(11));
  SceneGraph g = build_graph(fs, 1, GraphRule::kFullyConnected);
  CHECK(g.team_width == 3);  // two teams + ball
  CHECK(g.node_features.dim(1) == 4 + 3);
  // One-hot rows sum to 1.
  for (std::size_t o = 0; o < 11; ++o) {
    double s = 0.0;
    for (std::size_t f = 4; f < 7; ++f) s += g.node_features(o, f);
    CHECK(s == 1.0);
  }
}

TEST_CASE("invalid knn parameters are rejected") {
  FrameSeries fs = scene(4);
  CHECK_THROWS_AS(build_graph(fs, 0, GraphRule::kKnn, 4), ParameterError);
  CHECK_THROWS_AS(build_graph(fs, 0, GraphRule::kKnn, 0), ParameterError);
  CHECK_THROWS_AS(graph_rule_from_string("mesh"), ParameterError);
}

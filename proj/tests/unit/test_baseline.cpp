#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "forecast/errors.hpp"
#include "forecast/gradcheck.hpp"
#include "forecast/metrics.hpp"
#include "forecast/models/baseline.hpp"
#include "model_test_utils.hpp"

using namespace forecast;
using namespace forecast::models;
using forecast::test::make_sample;
using forecast::test::unit_stats;

TEST_CASE("constant velocity extrapolation") {
  Tensor still = constant_velocity_forecast({3.0, -1.0}, {0.0, 0.0}, 4);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(still(t, 0) == 3.0);
    CHECK(still(t, 1) == -1.0);
  }

  Tensor moving = constant_velocity_forecast({0.0, 0.0}, {1.0, 2.0}, 2);
  CHECK(moving(0, 0) == doctest::Approx(0.04));
  CHECK(moving(0, 1) == doctest::Approx(0.08));
  CHECK(moving(1, 0) == doctest::Approx(0.08));
  CHECK(moving(1, 1) == doctest::Approx(0.16));
}

TEST_CASE("constant velocity is exact on straight-line truth") {
  Rng rng(101);
  ConstantVelocityModel model;
  CHECK(!model.trainable());
  Sample s = make_sample(6, 5, 3, rng);
  s.last_pos_m = {2.0, 3.0};
  s.last_vel_m = {1.5, -0.75};
  for (std::size_t t = 0; t < 5; ++t) {
    const double step = 0.04 * static_cast<double>(t + 1);
    s.target_pos_m(t, 0) = 2.0 + 1.5 * step;
    s.target_pos_m(t, 1) = 3.0 - 0.75 * step;
  }
  Tensor pred = model.predict_positions_m(s, unit_stats());
  std::vector<eval::ForecastRecord> rec(1);
  rec[0].predicted = pred;
  rec[0].truth = s.target_pos_m;
  rec[0].last_pos = s.last_pos_m;
  CHECK(eval::fde(rec) <= 1e-12);
  CHECK(eval::ade(rec) <= 1e-12);
}

TEST_CASE("linear model with zero weights forecasts a standstill") {
  Rng rng(5);
  LinearConfig cfg;
  cfg.history_steps = 6;
  cfg.objects = 3;
  cfg.forecast_steps = 4;
  cfg.hidden = 8;
  LinearModel model(cfg, rng);
  for (Parameter* p : model.parameters()) p->value.fill(0.0);

  Sample s = make_sample(6, 4, 3, rng);
  ad::Tape tape;
  ad::Binder binder(tape, false);
  ad::Var out = model.predict(binder, s, false, nullptr);
  CHECK(out.value().size() == 8);
  for (std::size_t i = 0; i < out.value().size(); ++i) {
    CHECK(out.value()[i] == 0.0);
  }
  // Stationary after integrating zero velocities.
  Tensor pos = model.predict_positions_m(s, unit_stats());
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(pos(t, 0) == s.last_pos_m[0]);
    CHECK(pos(t, 1) == s.last_pos_m[1]);
  }
}

TEST_CASE("linear model rejects width mismatches") {
  Rng rng(6);
  LinearConfig cfg;
  cfg.history_steps = 6;
  cfg.objects = 3;
  cfg.forecast_steps = 4;
  cfg.hidden = 8;
  LinearModel model(cfg, rng);
  Sample wrong = make_sample(7, 4, 3, rng);  // H mismatch
  ad::Tape tape;
  ad::Binder binder(tape, false);
  CHECK_THROWS_AS(model.predict(binder, wrong, false, nullptr),
                  DimensionError);
}

TEST_CASE("linear flattening order is time-major then object then feature") {
  Rng rng(7);
  LinearConfig cfg;
  cfg.history_steps = 2;
  cfg.objects = 2;
  cfg.forecast_steps = 1;
  cfg.hidden = 8;
  LinearModel model(cfg, rng);
  Sample s = make_sample(2, 1, 2, rng);
  // Round-trip index check: poke one history velocity and confirm the
  // flattened position that moves.
  Tensor flat = scene_feature_rows(s.history_norm, s.ch_vx, s.ch_vy);
  for (std::size_t t = 0; t < 2; ++t) {
    for (std::size_t o = 0; o < 2; ++o) {
      CHECK(flat(t, 2 * o) == s.history_norm(t, o, s.ch_vx));
      CHECK(flat(t, 2 * o + 1) == s.history_norm(t, o, s.ch_vy));
    }
  }
}

TEST_CASE("linear model gradient check") {
  Rng rng(8);
  LinearConfig cfg;
  cfg.history_steps = 4;
  cfg.objects = 2;
  cfg.forecast_steps = 3;
  cfg.hidden = 6;
  LinearModel model(cfg, rng);
  Sample s = make_sample(4, 3, 2, rng);
  auto params = model.parameters();
  auto f = [&](ad::Tape& tape, ad::Binder& bind) {
    (void)tape;
    ad::Var out = model.predict(bind, s, false, nullptr);
    return ad::mse(out, bind.tape().constant(s.target_vel_norm));
  };
  auto report = ad::gradient_check(f, params, 1e-5, 1e-4);
  CHECK(report.ok(1e-4));
}

TEST_CASE("tcnn zero input gives the deterministic bias path") {
  Rng rng(9);
  TcnnConfig cfg;
  cfg.input_channels = 4;
  cfg.forecast_steps = 3;
  cfg.filters = 5;
  cfg.dilations = {1, 2};
  TcnnModel model(cfg, rng);
  Sample s = make_sample(6, 3, 2, rng);
  for (std::size_t i = 0; i < s.history_norm.size(); ++i) {
    s.history_norm[i] = 0.0;
  }
  ad::Tape t1, t2;
  ad::Binder b1(t1, false), b2(t2, false);
  Tensor o1 = model.predict(b1, s, false, nullptr).value();
  Tensor o2 = model.predict(b2, s, false, nullptr).value();
  CHECK(max_abs_diff(o1, o2) == 0.0);
}

TEST_CASE("tcnn causality holds layer by layer") {
  Rng rng(10);
  TcnnConfig cfg;
  cfg.input_channels = 3;
  cfg.forecast_steps = 2;
  cfg.filters = 4;
  cfg.dilations = {1, 2, 4};
  TcnnModel model(cfg, rng);

  const std::size_t T = 12;
  Tensor base({T, 3});
  for (std::size_t i = 0; i < base.size(); ++i) base[i] = rng.uniform(-1, 1);

  for (std::size_t t_perturb : {3UL, 7UL, 11UL}) {
    Tensor bumped = base;
    bumped(t_perturb, 1) += 0.5;
    ad::Tape tape;
    ad::Binder binder(tape, false);
    ad::Var f0 = model.forward_features(binder, tape.constant(base));
    ad::Binder binder2(tape, false);
    ad::Var f1 = model.forward_features(binder2, tape.constant(bumped));
    for (std::size_t t = 0; t < t_perturb; ++t) {
      for (std::size_t c = 0; c < 4; ++c) {
        CHECK(f0.value()(t, c) == f1.value()(t, c));
      }
    }
    // And the perturbation is visible at t itself.
    bool changed = false;
    for (std::size_t c = 0; c < 4; ++c) {
      changed = changed || f0.value()(t_perturb, c) != f1.value()(t_perturb, c);
    }
    CHECK(changed);
  }
}

TEST_CASE("tcnn channel mismatch is a dimension error") {
  Rng rng(11);
  TcnnConfig cfg;
  cfg.input_channels = 22;
  TcnnModel model(cfg, rng);
  Sample s = make_sample(6, 3, 2, rng);  // 2 objects -> 4 channels
  ad::Tape tape;
  ad::Binder binder(tape, false);
  CHECK_THROWS_AS(model.predict(binder, s, false, nullptr), DimensionError);
}

TEST_CASE("tcnn receptive field and gradient check") {
  Rng rng(12);
  TcnnConfig cfg;
  cfg.input_channels = 4;
  cfg.forecast_steps = 2;
  cfg.filters = 3;
  cfg.dilations = {1, 2};
  TcnnModel model(cfg, rng);
  // receptive field = 1 + sum (k-1)*d = 1 + 1 + 2 = 4
  Sample s = make_sample(6, 2, 2, rng);
  auto params = model.parameters();
  auto f = [&](ad::Tape&, ad::Binder& bind) {
    ad::Var out = model.predict(bind, s, false, nullptr);
    return ad::mse(out, bind.tape().constant(s.target_vel_norm));
  };
  auto report = ad::gradient_check(f, params, 1e-5, 1e-4);
  CHECK(report.ok(1e-4));
}

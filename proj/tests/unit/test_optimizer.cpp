#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "forecast/errors.hpp"
#include "forecast/optimizer.hpp"
#include "forecast/rng.hpp"

using namespace forecast;
using forecast::ad::Parameter;

namespace {

// Scalar step-by-step reference of the decoupled update rule.
struct ScalarAdamWRef {
  double m = 0.0, v = 0.0;
  std::uint64_t t = 0;

  double step(double p, double g, const AdamWConfig& c) {
    ++t;
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g * g;
    const double mhat = m / (1.0 - std::pow(c.beta1, double(t)));
    const double vhat = v / (1.0 - std::pow(c.beta2, double(t)));
    return p - c.lr * (mhat / (std::sqrt(vhat) + c.eps) + c.weight_decay * p);
  }
};

}  // namespace

TEST_CASE("zero gradient, zero decay leaves parameters unchanged") {
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  AdamW opt(cfg);
  Parameter p{"p", Tensor::vector({1.0, -2.0})};
  std::vector<Parameter*> params{&p};
  opt.step(params, {{"p", Tensor::vector({0.0, 0.0})}});
  CHECK(p.value[0] == 1.0);
  CHECK(p.value[1] == -2.0);
}

TEST_CASE("zero gradient with decay scales by (1 - lr*decay)") {
  AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.5;
  AdamW opt(cfg);
  Parameter p{"p", Tensor::vector({2.0, -4.0})};
  std::vector<Parameter*> params{&p};
  opt.step(params, {{"p", Tensor::vector({0.0, 0.0})}});
  CHECK(p.value[0] == doctest::Approx(2.0 * (1.0 - 0.05)).epsilon(1e-15));
  CHECK(p.value[1] == doctest::Approx(-4.0 * (1.0 - 0.05)).epsilon(1e-15));
}

TEST_CASE("constant gradient converges to a sign-like step of size lr") {
  AdamWConfig cfg;
  cfg.lr = 0.01;
  cfg.weight_decay = 0.0;
  AdamW opt(cfg);
  Parameter p{"p", Tensor::vector({5.0})};
  std::vector<Parameter*> params{&p};
  const Tensor g = Tensor::vector({0.3});
  double prev = p.value[0];
  double last_delta = 0.0;
  for (int i = 0; i < 400; ++i) {
    opt.step(params, {{"p", g}});
    last_delta = prev - p.value[0];
    prev = p.value[0];
  }
  // m-hat / (sqrt(v-hat)+eps) -> g/|g| = 1 for constant gradients.
  CHECK(last_delta == doctest::Approx(cfg.lr).epsilon(1e-6));
}

TEST_CASE("adamw without decay matches the scalar reference to machine precision") {
  AdamWConfig cfg;
  cfg.lr = 0.004;
  cfg.weight_decay = 0.0;
  AdamW opt(cfg);
  ScalarAdamWRef ref;
  Rng rng(71);
  Parameter p{"p", Tensor::vector({0.7})};
  std::vector<Parameter*> params{&p};
  double pref = 0.7;
  for (int i = 0; i < 100; ++i) {
    const double g = rng.uniform(-2.0, 2.0);
    opt.step(params, {{"p", Tensor::vector({g})}});
    pref = ref.step(pref, g, cfg);
    CHECK(p.value[0] == doctest::Approx(pref).epsilon(1e-15));
  }
  CHECK(opt.step_count() == 100);
}

TEST_CASE("with decay the reference simulation still matches exactly") {
  AdamWConfig cfg;
  cfg.lr = 0.02;
  cfg.weight_decay = 0.01;
  AdamW opt(cfg);
  ScalarAdamWRef ref;
  Parameter p{"p", Tensor::vector({-1.3})};
  std::vector<Parameter*> params{&p};
  double pref = -1.3;
  for (int i = 0; i < 50; ++i) {
    const double g = 0.1 * (i % 7) - 0.3;
    opt.step(params, {{"p", Tensor::vector({g})}});
    pref = ref.step(pref, g, cfg);
    CHECK(p.value[0] == doctest::Approx(pref).epsilon(1e-15));
  }
}

TEST_CASE("gradient shape mismatch is a parameter error") {
  AdamW opt;
  Parameter p{"p", Tensor::vector({1.0, 2.0})};
  std::vector<Parameter*> params{&p};
  CHECK_THROWS_AS(opt.step(params, {{"p", Tensor::vector({1.0})}}),
                  ParameterError);
}

TEST_CASE("warmup schedule follows the printed formula") {
  WarmupSchedule sched{256, 4000};
  // 256^-0.5 * 4000^-0.5, evaluated at high precision.
  CHECK(sched(4000) == doctest::Approx(9.882117688026186e-4).epsilon(1e-12));

  WarmupSchedule unit{1, 1};
  CHECK(unit(1) == 1.0);

  // Linear in t: doubling t doubles the rate.
  WarmupSchedule s2{64, 100};
  CHECK(s2(500) == doctest::Approx(2.0 * s2(250)).epsilon(1e-15));

  CHECK_THROWS_AS(sched(0), ParameterError);
}

TEST_CASE("rates are positive and strictly increasing") {
  WarmupSchedule sched{128, 2000};
  double prev = 0.0;
  for (std::uint64_t t = 1; t <= 5000; t += 97) {
    const double r = sched(t);
    CHECK(r > 0.0);
    CHECK(r > prev);
    prev = r;
  }
}

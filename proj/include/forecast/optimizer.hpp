#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>

#include "forecast/autodiff.hpp"
#include "forecast/tensor.hpp"

namespace forecast {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// AdamW with decoupled weight decay: the decay term is applied directly to
// the parameters and never enters the moment accumulators.
class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {});

  void set_lr(double lr) { config_.lr = lr; }
  double lr() const { return config_.lr; }
  const AdamWConfig& config() const { return config_; }
  std::uint64_t step_count() const { return step_; }

  // One update over all parameters; `grads` is keyed by parameter name.
  // Parameters without a gradient entry receive only the decay term.
  void step(std::span<ad::Parameter* const> params,
            const std::map<std::string, Tensor>& grads);

  struct Moments {
    Tensor m;
    Tensor v;
  };
  const Moments* moments(const std::string& name) const;

  void reset();

 private:
  AdamWConfig config_;
  std::uint64_t step_ = 0;
  std::map<std::string, Moments> state_;
};

// lr(t) = d_model^-0.5 * t / warmup_steps^1.5, exactly as printed; linear in
// t and unbounded, so callers cap total steps.
struct WarmupSchedule {
  std::size_t d_model = 256;
  std::size_t warmup_steps = 4000;

  double operator()(std::uint64_t t) const;
};

}  // namespace forecast

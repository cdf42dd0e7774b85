#include "forecast/optimizer.hpp"

#include <cmath>

#include "forecast/errors.hpp"

namespace forecast {

AdamW::AdamW(AdamWConfig config) : config_(config) {
  if (!(config_.lr > 0.0)) throw ParameterError("adamw: lr must be positive");
  if (config_.weight_decay < 0.0) {
    throw ParameterError("adamw: weight decay must be non-negative");
  }
}

void AdamW::step(std::span<ad::Parameter* const> params,
                 const std::map<std::string, Tensor>& grads) {
  ++step_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (ad::Parameter* p : params) {
    auto [it, inserted] = state_.try_emplace(p->name);
    Moments& mo = it->second;
    if (inserted) {
      mo.m = Tensor::zeros(p->value.shape());
      mo.v = Tensor::zeros(p->value.shape());
    } else if (!mo.m.same_shape(p->value)) {
      throw ParameterError("adamw: moment shape " + shape_str(mo.m.shape()) +
                           " does not match parameter " + p->name + " " +
                           shape_str(p->value.shape()));
    }

    const auto git = grads.find(p->name);
    if (git != grads.end() && !git->second.same_shape(p->value)) {
      throw ParameterError("adamw: gradient shape " +
                           shape_str(git->second.shape()) +
                           " does not match parameter " + p->name + " " +
                           shape_str(p->value.shape()));
    }

    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = git != grads.end() ? git->second[i] : 0.0;
      mo.m[i] = config_.beta1 * mo.m[i] + (1.0 - config_.beta1) * g;
      mo.v[i] = config_.beta2 * mo.v[i] + (1.0 - config_.beta2) * g * g;
      const double mhat = mo.m[i] / bc1;
      const double vhat = mo.v[i] / bc2;
      p->value[i] -= config_.lr * (mhat / (std::sqrt(vhat) + config_.eps) +
                                   config_.weight_decay * p->value[i]);
    }
  }
}

const AdamW::Moments* AdamW::moments(const std::string& name) const {
  const auto it = state_.find(name);
  return it == state_.end() ? nullptr : &it->second;
}

void AdamW::reset() {
  step_ = 0;
  state_.clear();
}

double WarmupSchedule::operator()(std::uint64_t t) const {
  if (d_model == 0 || warmup_steps == 0) {
    throw ParameterError("warmup schedule: d_model and warmup_steps must be positive");
  }
  if (t < 1) throw ParameterError("warmup schedule: t must be >= 1");
  return std::pow(static_cast<double>(d_model), -0.5) *
         static_cast<double>(t) /
         std::pow(static_cast<double>(warmup_steps), 1.5);
}

}  // namespace forecast

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "forecast/autodiff.hpp"

namespace forecast::ad {

struct GradCheckEntry {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  GradCheckEntry worst;
  std::size_t coordinates = 0;
  std::vector<std::string> diagnostics;  // non-finite evaluations, by coordinate

  bool ok(double tolerance) const {
    return diagnostics.empty() && max_rel_error < tolerance;
  }
};

// Builds the scalar loss for the current parameter values.
using ScalarFn = std::function<Var(Tape&, Binder&)>;

// Compares tape gradients against central finite differences of `f` for every
// coordinate of every parameter. rel = |a-n| / max(|a|, |n|, 1e-12).
GradCheckReport gradient_check(const ScalarFn& f,
                               std::span<Parameter* const> params, double step,
                               double tolerance);

}  // namespace forecast::ad

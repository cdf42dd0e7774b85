#include "forecast/gradcheck.hpp"

#include <cmath>

#include "forecast/errors.hpp"

namespace forecast::ad {

namespace {

double eval_scalar(const ScalarFn& f) {
  Tape tape;
  Binder binder(tape, /*with_grad=*/false);
  Var loss = f(tape, binder);
  return loss.value()[0];
}

}  // namespace

GradCheckReport gradient_check(const ScalarFn& f,
                               std::span<Parameter* const> params, double step,
                               double tolerance) {
  if (!(step > 0.0)) {
    throw ParameterError("gradient_check: step must be positive");
  }
  (void)tolerance;

  // Analytic pass.
  Tape tape;
  Binder binder(tape);
  Var loss = f(tape, binder);
  Gradients grads = tape.backward(loss);

  GradCheckReport report;
  for (const auto& [param, var] : binder.bound()) {
    const Tensor& analytic = grads.at(var);
    for (std::size_t i = 0; i < param->value.size(); ++i) {
      const double saved = param->value[i];
      param->value[i] = saved + step;
      const double fp = eval_scalar(f);
      param->value[i] = saved - step;
      const double fm = eval_scalar(f);
      param->value[i] = saved;

      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        report.diagnostics.push_back("non-finite evaluation at " + param->name +
                                     "[" + std::to_string(i) + "]");
        continue;
      }
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic[i];
      const double denom =
          std::max({std::fabs(a), std::fabs(numeric), 1e-12});
      const double rel = std::fabs(a - numeric) / denom;
      ++report.coordinates;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst = {param->name, i, a, numeric, rel};
      }
    }
  }
  return report;
}

}  // namespace forecast::ad

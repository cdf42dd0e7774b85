#include "forecast/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "forecast/errors.hpp"

namespace forecast::eval {

namespace {

constexpr double kDegPerRad = 180.0 / M_PI;
constexpr double kZeroNorm = 1e-9;

void require_records(std::span<const ForecastRecord> records,
                     const char* op) {
  if (records.empty()) {
    throw ParameterError(std::string(op) + ": empty record batch");
  }
  const std::size_t P = records.front().predicted.dim(0);
  for (const auto& r : records) {
    if (r.predicted.rank() != 2 || r.predicted.dim(1) != 2 ||
        !r.predicted.same_shape(r.truth) || r.predicted.dim(0) != P) {
      throw DimensionError(std::string(op) +
                           ": records must hold matching [P x 2] tensors");
    }
  }
}

double displacement(const ForecastRecord& r, std::size_t t) {
  const double dx = r.truth(t, 0) - r.predicted(t, 0);
  const double dy = r.truth(t, 1) - r.predicted(t, 1);
  return std::sqrt(dx * dx + dy * dy);
}

// Step velocity from consecutive positions, seeded by the last known
// position at t = 0.
std::array<double, 2> step_velocity(const Tensor& pos,
                                    const std::array<double, 2>& p0,
                                    std::size_t t, double dt) {
  const double px = t == 0 ? p0[0] : pos(t - 1, 0);
  const double py = t == 0 ? p0[1] : pos(t - 1, 1);
  return {(pos(t, 0) - px) / dt, (pos(t, 1) - py) / dt};
}

}  // namespace

Tensor integrate_velocities(const std::array<double, 2>& p0,
                            const Tensor& velocities, double dt) {
  if (velocities.rank() != 2 || velocities.dim(1) != 2) {
    throw DimensionError("integrate_velocities: expected [P x 2], got " +
                         shape_str(velocities.shape()));
  }
  const std::size_t P = velocities.dim(0);
  Tensor out({P, 2});
  double x = p0[0], y = p0[1];
  for (std::size_t t = 0; t < P; ++t) {
    x += velocities(t, 0) * dt;
    y += velocities(t, 1) * dt;
    out(t, 0) = x;
    out(t, 1) = y;
  }
  return out;
}

double ade(std::span<const ForecastRecord> records) {
  require_records(records, "ade");
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& r : records) {
    for (std::size_t t = 0; t < r.predicted.dim(0); ++t) {
      sum += displacement(r, t);
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

double fde(std::span<const ForecastRecord> records) {
  require_records(records, "fde");
  double sum = 0.0;
  for (const auto& r : records) {
    sum += displacement(r, r.predicted.dim(0) - 1);
  }
  return sum / static_cast<double>(records.size());
}

std::optional<double> signed_angle_checked(
    const std::array<double, 2>& v_true, const std::array<double, 2>& v_pred) {
  const double nt = std::sqrt(v_true[0] * v_true[0] + v_true[1] * v_true[1]);
  const double np = std::sqrt(v_pred[0] * v_pred[0] + v_pred[1] * v_pred[1]);
  if (nt < kZeroNorm || np < kZeroNorm) return std::nullopt;
  double c = (v_true[0] * v_pred[0] + v_true[1] * v_pred[1]) / (nt * np);
  c = std::min(1.0, std::max(-1.0, c));
  const double theta = std::acos(c) * kDegPerRad;
  const double cross = v_true[0] * v_pred[1] - v_true[1] * v_pred[0];
  if (cross > 0.0) return theta;
  if (cross < 0.0) return -theta;
  return theta;  // collinear: 0 or +180 (antiparallel)
}

double signed_angle(const std::array<double, 2>& v_true,
                    const std::array<double, 2>& v_pred) {
  return signed_angle_checked(v_true, v_pred).value_or(0.0);
}

namespace {

struct AngleSums {
  // Per-step sum of |angle| and count of valid steps.
  std::vector<double> sum;
  std::vector<std::size_t> count;
  std::size_t flagged = 0;
};

AngleSums angle_sums(std::span<const ForecastRecord> records, double dt) {
  const std::size_t P = records.front().predicted.dim(0);
  AngleSums s;
  s.sum.assign(P, 0.0);
  s.count.assign(P, 0);
  for (const auto& r : records) {
    for (std::size_t t = 0; t < P; ++t) {
      const auto vt = step_velocity(r.truth, r.last_pos, t, dt);
      const auto vp = step_velocity(r.predicted, r.last_pos, t, dt);
      const auto angle = signed_angle_checked(vt, vp);
      if (!angle) {
        ++s.flagged;
        continue;
      }
      s.sum[t] += std::fabs(*angle);
      ++s.count[t];
    }
  }
  return s;
}

}  // namespace

double aae(std::span<const ForecastRecord> records, double dt) {
  require_records(records, "aae");
  const AngleSums s = angle_sums(records, dt);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < s.sum.size(); ++t) {
    sum += s.sum[t];
    count += s.count[t];
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

double fae(std::span<const ForecastRecord> records, double dt) {
  require_records(records, "fae");
  const AngleSums s = angle_sums(records, dt);
  const std::size_t last = s.sum.size() - 1;
  return s.count[last] ? s.sum[last] / static_cast<double>(s.count[last])
                       : 0.0;
}

std::size_t MetricReport::step_for_horizon(double horizon_s) const {
  const auto step = static_cast<std::size_t>(std::llround(horizon_s / dt));
  if (step < 1 || step > horizon_steps) {
    throw ParameterError("horizon " + std::to_string(horizon_s) +
                         " s outside the evaluated range");
  }
  return step - 1;
}

MetricReport evaluate_records(std::span<const ForecastRecord> records,
                              const std::string& model, double dt) {
  require_records(records, "evaluate_records");
  MetricReport report;
  report.model = model;
  report.samples = records.size();
  report.dt = dt;
  const std::size_t P = records.front().predicted.dim(0);
  report.horizon_steps = P;

  report.fde_curve.assign(P, 0.0);
  for (const auto& r : records) {
    for (std::size_t t = 0; t < P; ++t) {
      report.fde_curve[t] += displacement(r, t);
    }
  }
  for (double& v : report.fde_curve) v /= static_cast<double>(records.size());

  report.ade_curve.assign(P, 0.0);
  double running = 0.0;
  for (std::size_t t = 0; t < P; ++t) {
    running += report.fde_curve[t];
    report.ade_curve[t] = running / static_cast<double>(t + 1);
  }

  const AngleSums s = angle_sums(records, dt);
  report.flagged_steps = s.flagged;
  report.fae_curve.assign(P, 0.0);
  report.aae_curve.assign(P, 0.0);
  double asum = 0.0;
  std::size_t acount = 0;
  for (std::size_t t = 0; t < P; ++t) {
    report.fae_curve[t] =
        s.count[t] ? s.sum[t] / static_cast<double>(s.count[t]) : 0.0;
    asum += s.sum[t];
    acount += s.count[t];
    report.aae_curve[t] = acount ? asum / static_cast<double>(acount) : 0.0;
  }
  return report;
}

std::string metric_csv_header() {
  return "model,horizon_s,ade_m,fde_m,aae_deg,fae_deg,n";
}

std::string metric_csv_row(const MetricReport& report, double horizon_s) {
  const std::size_t i = report.step_for_horizon(horizon_s);
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%.2f,%.6f,%.6f,%.6f,%.6f,%zu",
                report.model.c_str(), horizon_s, report.ade_curve[i],
                report.fde_curve[i], report.aae_curve[i], report.fae_curve[i],
                report.samples);
  return buf;
}

}  // namespace forecast::eval

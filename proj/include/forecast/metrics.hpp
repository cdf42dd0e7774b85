#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "forecast/data.hpp"
#include "forecast/tensor.hpp"

namespace forecast::eval {

// One evaluated forecast: predicted and true positions over the horizon plus
// the last known position the horizon starts from. Meters throughout.
struct ForecastRecord {
  Tensor predicted;  // [P x 2]
  Tensor truth;      // [P x 2]
  std::array<double, 2> last_pos{0.0, 0.0};
};

// p_i = p_{i-1} + v_i * dt, starting from p0.
Tensor integrate_velocities(const std::array<double, 2>& p0,
                            const Tensor& velocities,
                            double dt = data::kFrameDt);

// Mean Euclidean displacement over all samples and steps.
double ade(std::span<const ForecastRecord> records);

// Mean Euclidean displacement at the final step only.
double fde(std::span<const ForecastRecord> records);

// Signed angle from v_true to v_pred in degrees, in (-180, 180]. Positive
// when the 2-D cross product v_true x v_pred is positive; antiparallel
// vectors map to +180. Returns nullopt when either norm is < 1e-9.
std::optional<double> signed_angle_checked(const std::array<double, 2>& v_true,
                                           const std::array<double, 2>& v_pred);

// As above, but degenerate steps contribute 0.
double signed_angle(const std::array<double, 2>& v_true,
                    const std::array<double, 2>& v_pred);

// Mean absolute signed angle over samples and steps / at the final step.
// Velocities are derived from consecutive positions; zero-velocity steps are
// excluded from the averages (the count is reported via MetricReport).
double aae(std::span<const ForecastRecord> records,
           double dt = data::kFrameDt);
double fae(std::span<const ForecastRecord> records,
           double dt = data::kFrameDt);

// Per-horizon-step error curves aggregated over a record batch.
struct MetricReport {
  std::string model;
  std::size_t samples = 0;
  std::size_t horizon_steps = 0;
  double dt = data::kFrameDt;
  std::vector<double> fde_curve;  // mean displacement at step t
  std::vector<double> ade_curve;  // mean displacement over steps <= t
  std::vector<double> fae_curve;  // mean |angle| at step t (deg)
  std::vector<double> aae_curve;  // mean |angle| over steps <= t (deg)
  std::size_t flagged_steps = 0;  // zero-velocity exclusions

  double ade() const { return ade_curve.back(); }
  double fde() const { return fde_curve.back(); }
  double aae() const { return aae_curve.back(); }
  double fae() const { return fae_curve.back(); }

  // Index of the curve entry for a horizon in seconds (1-based steps).
  std::size_t step_for_horizon(double horizon_s) const;
};

MetricReport evaluate_records(std::span<const ForecastRecord> records,
                              const std::string& model,
                              double dt = data::kFrameDt);

// CSV schema: model,horizon_s,ade_m,fde_m,aae_deg,fae_deg,n
std::string metric_csv_header();
std::string metric_csv_row(const MetricReport& report, double horizon_s);

}  // namespace forecast::eval

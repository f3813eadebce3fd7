#pragma once

// Analytic noise model and the three-ratio countermeasure.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "cvqkd/attack.hpp"
#include "cvqkd/protocol.hpp"

namespace cvqkd::analysis {

/// Population variance of Bob's outcome at attenuation ratio r for an
/// honest session.
double analytic_variance(const protocol::SystemParams& params, double ratio);

/// Same for an attacked session: Part-1 variance of the plan's strategy plus
/// the Part-2 displacement spread and foreign-pulse shot noise, computed
/// from the plan's pulses on `curve`.
double analytic_variance(const protocol::SystemParams& params, const attack::AttackPlan& plan,
                         const physics::BeamSplitterCurve& curve, double ratio);

/// Variance of the Part-2 contribution alone.
double part2_variance(const attack::WavelengthPlan& plan, const physics::BeamSplitterCurve& curve,
                      const physics::DetectorConfig& detector, double ratio);

/// Two-point estimator applied to exact analytic variances at the
/// schedule's extreme ratios.
protocol::TwoPointEstimate analytic_two_point(const protocol::SystemParams& params);
protocol::TwoPointEstimate analytic_two_point(const protocol::SystemParams& params,
                                              const attack::AttackPlan& plan,
                                              const physics::BeamSplitterCurve& curve);

/// Excess noise Bob infers at `ratio` when he trusts N0 = eta*I_LO instead
/// of measuring it (shot-noise units).
double known_unit_excess_noise(const protocol::SystemParams& params, const attack::AttackPlan& plan,
                               const physics::BeamSplitterCurve& curve, double ratio = 1.0);

/// V(r) = a r^2 + b r + c.
struct NoisePolynomial {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double residual = 0.0;  // weighted sum of squared residuals
  std::map<double, std::uint64_t> sample_sizes;

  double operator()(double r) const noexcept { return (a * r + b) * r + c; }
  double a_over_c() const noexcept { return a / c; }
};

struct VariancePoint {
  double ratio;
  double variance;
  double weight;
};

/// Weighted least squares against (r^2, r, 1). Throws ConfigError with fewer
/// than three distinct ratios (the two-point regime cannot see curvature).
NoisePolynomial fit_noise_polynomial(std::span<const VariancePoint> points);

/// Fit to per-ratio sample variances, weighted by count / (2 V^2).
NoisePolynomial fit_noise_polynomial(const protocol::SessionStatistics& stats);
NoisePolynomial fit_noise_polynomial(std::span<const protocol::PulseRecord> records);

/// Population-level polynomial through the analytic variances at every
/// scheduled ratio.
NoisePolynomial analytic_noise_polynomial(const protocol::SystemParams& params);
NoisePolynomial analytic_noise_polynomial(const protocol::SystemParams& params,
                                          const attack::AttackPlan& plan,
                                          const physics::BeamSplitterCurve& curve);

inline constexpr double kDefaultThreshold = 0.05;

struct DetectionVerdict {
  double ratio_a_over_c = 0.0;
  double threshold = kDefaultThreshold;
  bool attacked = false;
  bool lo_intensity_anomaly = false;
  bool wavelength_band_violation = false;
};

/// attacked = a/c > threshold || LO anomaly || band violation.
/// Throws DomainError unless threshold > 0.
DetectionVerdict detect(const NoisePolynomial& poly, double threshold = kDefaultThreshold,
                        std::optional<bool> lo_intensity_anomaly = std::nullopt,
                        std::optional<bool> wavelength_band_violation = std::nullopt);

/// Fraction of pulses carrying an attenuation ratio other than 1.
double schedule_key_rate_overhead(const protocol::AttenuationSchedule& schedule);

/// True when the observed mean LO intensity deviates from `expected` by more
/// than `tolerance` (relative). Throws DomainError unless expected > 0.
bool monitor_lo_intensity(std::span<const double> lo_stream, double expected, double tolerance);
bool monitor_lo_intensity(std::span<const protocol::PulseRecord> records, double expected,
                          double tolerance);
bool monitor_lo_intensity(const protocol::RunningMoments& lo, double expected, double tolerance);

/// True when any pulse of the plan with nonzero intensity lies outside
/// [center - half_width, center + half_width].
bool wavelength_band_violation(const attack::WavelengthPlan& plan, double center_nm,
                               double half_width_nm);

}  // namespace cvqkd::analysis

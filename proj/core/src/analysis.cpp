#include "cvqkd/analysis.hpp"

#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "cvqkd/errors.hpp"

namespace cvqkd::analysis {

using protocol::SystemParams;

double analytic_variance(const SystemParams& params, double ratio) {
  const double n0 = params.shot_noise_unit();
  return ratio * params.eta() * params.channel_transmittance *
             (params.modulation_variance + params.excess_noise) * n0 +
         n0 + params.v_el();
}

double part2_variance(const attack::WavelengthPlan& plan, const physics::BeamSplitterCurve& curve,
                      const physics::DetectorConfig& detector, double ratio) {
  double mean = 0.0;
  double second = 0.0;
  double shot = 0.0;
  for (int set : {1, 2}) {
    const auto& pair = plan.set(set);
    const auto lo = physics::foreign_pulse_response(detector, curve, pair.lo);
    const auto sig = physics::foreign_pulse_response(detector, curve, pair.signal);
    const double displacement = lo.mean + ratio * sig.mean;
    mean += 0.5 * displacement;
    second += 0.5 * displacement * displacement;
    shot += 0.5 * (lo.variance + ratio * ratio * sig.variance);
  }
  return second - mean * mean + shot;
}

double analytic_variance(const SystemParams& params, const attack::AttackPlan& plan,
                         const physics::BeamSplitterCurve& curve, double ratio) {
  const double n0 = params.shot_noise_unit();
  const double noise = params.modulation_variance + 2.0 + params.excess_noise;
  double part1 = 0.0;
  if (const auto* a = std::get_if<attack::StrategyA>(&plan.strategy)) {
    part1 = ratio * params.eta() * params.channel_transmittance * noise * n0 + n0 / a->amplification;
  } else {
    const auto& b = std::get<attack::StrategyB>(plan.strategy);
    part1 = b.slope_factor * (ratio * params.eta() * b.fake_channel * noise + 1.0) * n0;
  }
  return part1 + params.v_el() + part2_variance(plan.wavelength, curve, params.detector, ratio);
}

protocol::TwoPointEstimate analytic_two_point(const SystemParams& params) {
  const double lo = params.schedule.min_ratio();
  const double hi = params.schedule.max_ratio();
  return protocol::two_point_from_variances(analytic_variance(params, lo),
                                            analytic_variance(params, hi), lo, hi, params);
}

protocol::TwoPointEstimate analytic_two_point(const SystemParams& params,
                                              const attack::AttackPlan& plan,
                                              const physics::BeamSplitterCurve& curve) {
  const double lo = params.schedule.min_ratio();
  const double hi = params.schedule.max_ratio();
  return protocol::two_point_from_variances(analytic_variance(params, plan, curve, lo),
                                            analytic_variance(params, plan, curve, hi), lo, hi,
                                            params);
}

double known_unit_excess_noise(const SystemParams& params, const attack::AttackPlan& plan,
                               const physics::BeamSplitterCurve& curve, double ratio) {
  return protocol::excess_noise_known_shot_noise(analytic_variance(params, plan, curve, ratio),
                                                 ratio, params);
}

NoisePolynomial fit_noise_polynomial(std::span<const VariancePoint> points) {
  std::map<double, int> distinct;
  for (const auto& p : points) ++distinct[p.ratio];
  if (distinct.size() < 3) {
    throw ConfigError(fmt::format(
        "countermeasure inapplicable: curvature needs 3 distinct ratios, got {}", distinct.size()));
  }
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd design(n, 3);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = points[static_cast<std::size_t>(i)];
    if (!(p.weight > 0.0) || !std::isfinite(p.variance)) {
      throw ConfigError(fmt::format("invalid variance point at ratio {}", p.ratio));
    }
    const double w = std::sqrt(p.weight);
    design(i, 0) = w * p.ratio * p.ratio;
    design(i, 1) = w * p.ratio;
    design(i, 2) = w;
    rhs(i) = w * p.variance;
  }
  const Eigen::Vector3d coef = design.colPivHouseholderQr().solve(rhs);

  NoisePolynomial poly;
  poly.a = coef(0);
  poly.b = coef(1);
  poly.c = coef(2);
  poly.residual = (design * coef - rhs).squaredNorm();
  return poly;
}

NoisePolynomial fit_noise_polynomial(const protocol::SessionStatistics& stats) {
  std::vector<VariancePoint> points;
  for (const auto& [ratio, m] : stats.per_ratio) {
    if (m.count < 2) {
      throw ConfigError(fmt::format("ratio {} has {} record(s); need at least 2", ratio, m.count));
    }
    const double v = m.variance_y();
    points.push_back({ratio, v, static_cast<double>(m.count) / (2.0 * v * v)});
  }
  if (points.size() < 3) {
    throw ConfigError(fmt::format(
        "countermeasure inapplicable: curvature needs 3 distinct ratios, got {}", points.size()));
  }
  auto poly = fit_noise_polynomial(points);
  for (const auto& [ratio, m] : stats.per_ratio) poly.sample_sizes[ratio] = m.count;
  return poly;
}

NoisePolynomial fit_noise_polynomial(std::span<const protocol::PulseRecord> records) {
  return fit_noise_polynomial(protocol::SessionStatistics::from_records(records));
}

namespace {

template <class VarianceAt>
NoisePolynomial polynomial_over_schedule(const SystemParams& params, VarianceAt variance_at) {
  std::vector<VariancePoint> points;
  for (const auto& e : params.schedule.entries()) points.push_back({e.ratio, variance_at(e.ratio), 1.0});
  return fit_noise_polynomial(points);
}

}  // namespace

NoisePolynomial analytic_noise_polynomial(const SystemParams& params) {
  return polynomial_over_schedule(params, [&](double r) { return analytic_variance(params, r); });
}

NoisePolynomial analytic_noise_polynomial(const SystemParams& params, const attack::AttackPlan& plan,
                                          const physics::BeamSplitterCurve& curve) {
  return polynomial_over_schedule(
      params, [&](double r) { return analytic_variance(params, plan, curve, r); });
}

DetectionVerdict detect(const NoisePolynomial& poly, double threshold,
                        std::optional<bool> lo_intensity_anomaly,
                        std::optional<bool> wavelength_band_violation) {
  if (!(threshold > 0.0)) throw DomainError(fmt::format("threshold {} must be > 0", threshold));
  DetectionVerdict v;
  v.ratio_a_over_c = poly.a_over_c();
  v.threshold = threshold;
  v.lo_intensity_anomaly = lo_intensity_anomaly.value_or(false);
  v.wavelength_band_violation = wavelength_band_violation.value_or(false);
  v.attacked = v.ratio_a_over_c > threshold || v.lo_intensity_anomaly || v.wavelength_band_violation;
  return v;
}

double schedule_key_rate_overhead(const protocol::AttenuationSchedule& schedule) {
  double discarded = 0.0;
  for (const auto& e : schedule.entries()) {
    if (e.ratio != 1.0) discarded += e.probability;
  }
  return discarded;
}

namespace {

bool deviates(double observed, double expected, double tolerance) {
  if (!(expected > 0.0)) throw DomainError(fmt::format("expected LO intensity {} must be > 0", expected));
  return std::abs(observed - expected) > tolerance * expected;
}

}  // namespace

bool monitor_lo_intensity(std::span<const double> lo_stream, double expected, double tolerance) {
  protocol::RunningMoments m;
  for (double v : lo_stream) m.add(v);
  return monitor_lo_intensity(m, expected, tolerance);
}

bool monitor_lo_intensity(std::span<const protocol::PulseRecord> records, double expected,
                          double tolerance) {
  protocol::RunningMoments m;
  for (const auto& r : records) m.add(r.lo_intensity);
  return monitor_lo_intensity(m, expected, tolerance);
}

bool monitor_lo_intensity(const protocol::RunningMoments& lo, double expected, double tolerance) {
  if (lo.count == 0) return deviates(0.0, expected, tolerance);
  return deviates(lo.mean, expected, tolerance);
}

bool wavelength_band_violation(const attack::WavelengthPlan& plan, double center_nm,
                               double half_width_nm) {
  for (int set : {1, 2}) {
    for (const auto* p : {&plan.set(set).signal, &plan.set(set).lo}) {
      if (p->intensity > 0.0 && std::abs(p->wavelength_nm - center_nm) > half_width_nm) return true;
    }
  }
  return false;
}

}  // namespace cvqkd::analysis

#include <gtest/gtest.h>

#include <cmath>
#include <ostream>
#include <vector>

#include "cvqkd/analysis.hpp"
#include "cvqkd/attack.hpp"
#include "cvqkd/errors.hpp"
#include "oracle.hpp"

using namespace cvqkd;
using namespace cvqkd::attack;
using physics::BeamSplitterCurve;
using protocol::SystemParams;

namespace {

const BeamSplitterCurve& curve() { return BeamSplitterCurve::coupler_50_50(); }

SystemParams system_at(double eta_ch, double xi = 0.1) {
  SystemParams s;
  s.channel_transmittance = eta_ch;
  s.excess_noise = xi;
  return s;
}

oracle::Params oracle_at(double eta_ch, double xi = 0.1) {
  oracle::Params o;
  o.eta_ch = eta_ch;
  o.xi = xi;
  return o;
}

std::vector<double> outcomes(const std::vector<protocol::PulseRecord>& records, double ratio) {
  std::vector<double> out;
  for (const auto& r : records)
    if (r.ratio_applied == ratio) out.push_back(r.bob_outcome);
  return out;
}

}  // namespace

namespace cvqkd::attack {
void PrintTo(StrategyKind kind, std::ostream* os) { *os << to_string(kind); }
}  // namespace cvqkd::attack

TEST(Coefficients, RecomputedFromTable) {
  const auto k = shot_noise_coefficients(curve(), {});
  EXPECT_NEAR(k.lo, 35.81, 0.05);
  EXPECT_NEAR(k.signal, 35.47, 0.05);
  EXPECT_NEAR(k.lo, oracle::k_lo(), 1e-12);
  EXPECT_NEAR(k.signal, oracle::k_s(), 1e-12);
}

TEST(Coefficients, IndependentOfDetectorEfficiency) {
  for (double eta : {0.3, 0.5, 0.9}) {
    physics::DetectorConfig det;
    det.efficiency = eta;
    const auto plan = WavelengthPlan::from_displacement(5000, {}, curve(), det);
    const double i_lo = 0.5 * (plan.set1.lo.intensity + plan.set2.lo.intensity);
    EXPECT_NEAR(eta * i_lo / 5000, oracle::k_lo(), 1e-9);
  }
}

TEST(WavelengthPlan, FourWayDisplacementEquality) {
  physics::DetectorConfig det;
  const auto plan = WavelengthPlan::from_displacement(6885.3, {}, curve(), det);
  EXPECT_NO_THROW(plan.verify(curve(), det));
  EXPECT_NEAR(physics::foreign_pulse_response(det, curve(), plan.set1.signal).mean, 6885.3, 1e-9 * 6885.3);
  EXPECT_NEAR(physics::foreign_pulse_response(det, curve(), plan.set1.lo).mean, -6885.3, 1e-9 * 6885.3);
  EXPECT_NEAR(physics::foreign_pulse_response(det, curve(), plan.set2.signal).mean, -6885.3, 1e-9 * 6885.3);
  EXPECT_NEAR(physics::foreign_pulse_response(det, curve(), plan.set2.lo).mean, 6885.3, 1e-9 * 6885.3);

  auto broken = plan;
  broken.set2.lo.intensity *= 1.001;
  EXPECT_THROW(broken.verify(curve(), det), PlanConsistencyError);
  // 1550 nm has T > 1/2 and cannot carry a positive signal-path displacement.
  EXPECT_THROW(WavelengthPlan::from_displacement(1000, {1550, 1490, 1310, 1590}, curve(), det), ConfigError);
}

TEST(Solver, StrategyAMatchesQuadraticOracle) {
  const auto sys = system_at(0.9);
  const auto plan = solve_attack_parameters(StrategyKind::A, sys, curve());
  const auto ref = oracle::design(oracle_at(0.9), 0.001, 1.0);
  EXPECT_NEAR(plan.wavelength.displacement, ref.d, 1e-9 * ref.d);
  const double n = std::get<StrategyA>(plan.strategy).amplification;
  EXPECT_NEAR(n, 5e7 / ref.budget, 1e-8 * n);
  EXPECT_GE(n, 20.0);
  EXPECT_LE(n, 22.0);

  const double d = ref.d;
  EXPECT_NEAR(plan.wavelength.set1.signal.intensity, oracle::intensity_for(d, 0.5, 0.4862), 1e-6);
  EXPECT_NEAR(plan.wavelength.set1.lo.intensity, oracle::intensity_for(d, 0.5, 0.4873), 1e-6);
  EXPECT_NEAR(plan.wavelength.set2.signal.intensity, oracle::intensity_for(d, 0.5, 0.5144), 1e-6);
  EXPECT_NEAR(plan.wavelength.set2.lo.intensity, oracle::intensity_for(d, 0.5, 0.5155), 1e-6);

  const double expected[] = {5e5, 5.4e5, 4.8e5, 4.4e5};
  const double got[] = {plan.wavelength.set1.signal.intensity, plan.wavelength.set1.lo.intensity,
                        plan.wavelength.set2.signal.intensity, plan.wavelength.set2.lo.intensity};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(got[i] / expected[i], 1.0, 0.05) << i;

  const auto est = design_estimates(sys, plan, curve());
  EXPECT_NEAR(est.shot_noise / sys.shot_noise_unit(), 1.0, 1e-9);
  EXPECT_LT(std::fabs(est.excess_noise), 1e-9);
  EXPECT_NO_THROW(plan.validate(sys, curve()));
}

TEST(Solver, StrategyBMatchesQuadraticOracle) {
  const auto sys = system_at(0.5);
  const auto plan = solve_attack_parameters(StrategyKind::B, sys, curve());
  const auto ref = oracle::design(oracle_at(0.5), 0.001, 1.0);
  const auto& b = std::get<StrategyB>(plan.strategy);
  EXPECT_NEAR(plan.wavelength.displacement, ref.d, 1e-9 * ref.d);
  EXPECT_NEAR(b.slope_factor, ref.budget / 5e7, 1e-9);
  EXPECT_NEAR(b.slope_factor, 0.47, 0.02);
  EXPECT_NEAR(b.slope_factor * b.fake_channel, 0.5, 1e-12);

  const double expected[] = {3.72e5, 4.04e5, 3.56e5, 3.31e5};
  const double got[] = {plan.wavelength.set1.signal.intensity, plan.wavelength.set1.lo.intensity,
                        plan.wavelength.set2.signal.intensity, plan.wavelength.set2.lo.intensity};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(got[i] / expected[i], 1.0, 0.05) << i;

  const auto est = design_estimates(sys, plan, curve());
  EXPECT_NEAR(est.shot_noise / sys.shot_noise_unit(), 1.0, 1e-9);
  EXPECT_LT(std::fabs(est.excess_noise), 1e-9);
}

TEST(Solver, InfeasibleRegimeReportsBoundary) {
  // Part 2 alone exceeds N0 once the design budget turns negative.
  double lo = 0.5, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (oracle::design(oracle_at(mid), 0.001, 1.0).budget > 0 ? lo : hi) = mid;
  }
  try {
    solve_attack_parameters(StrategyKind::A, system_at(1.0), curve());
    FAIL() << "expected InfeasibleError";
  } catch (const InfeasibleError& e) {
    EXPECT_FALSE(e.constraint().empty());
    EXPECT_NEAR(e.boundary(), lo, 1e-6);
  }
  EXPECT_THROW(solve_attack_parameters(StrategyKind::A, system_at(1.0, 0.0), curve()), InfeasibleError);
  EXPECT_THROW(solve_attack_parameters(StrategyKind::B, system_at(1.0), curve()), InfeasibleError);
}

TEST(Solver, LowTransmittanceIsFeasibleInDesignModel) {
  const auto plan = solve_attack_parameters(StrategyKind::A, system_at(0.1), curve());
  const auto ref = oracle::design(oracle_at(0.1), 0.001, 1.0);
  EXPECT_GT(ref.budget, 0);
  EXPECT_NEAR(std::get<StrategyA>(plan.strategy).amplification, 5e7 / ref.budget, 1e-8);
}

TEST(Solver, ResidualsVanishAcrossRegimes) {
  for (double eta_ch : {0.2, 0.4, 0.6, 0.8, 0.9}) {
    for (auto kind : {StrategyKind::A, StrategyKind::B}) {
      const auto sys = system_at(eta_ch);
      const auto plan = solve_attack_parameters(kind, sys, curve());
      EXPECT_NO_THROW(plan.validate(sys, curve()));
      const auto est = design_estimates(sys, plan, curve());
      EXPECT_NEAR(est.shot_noise / sys.shot_noise_unit(), 1.0, 1e-9);
      EXPECT_LT(std::fabs(est.excess_noise), 1e-9);
      EXPECT_NO_THROW(plan.wavelength.verify(curve(), sys.detector));
    }
  }
}

TEST(Plan, ValidationRejectsInconsistentStrategies) {
  const auto sys = system_at(0.5);
  auto plan = solve_attack_parameters(StrategyKind::B, sys, curve());
  plan.strategy = StrategyB{0.5, 0.5};
  EXPECT_THROW(plan.validate(sys, curve()), PlanConsistencyError);
  plan.strategy = StrategyB{1.5, 1.0 / 3.0};
  EXPECT_THROW(plan.validate(sys, curve()), PlanConsistencyError);
  plan.strategy = StrategyA{0.5};
  EXPECT_THROW(plan.validate(sys, curve()), PlanConsistencyError);
  EveMeasurement eve{};
  EXPECT_THROW(resend_strategy_b(StrategyB{0.5, 0.5}, eve, sys), PlanConsistencyError);
}

TEST(Heterodyne, AddsTwoShotNoiseUnits) {
  SystemParams sys;
  Rng rng(12);
  std::vector<double> diff(1000000);
  for (auto& d : diff) {
    const double x = protocol::alice_modulate(rng, sys);
    const double p = protocol::alice_modulate(rng, sys);
    d = heterodyne_intercept(rng, x, p, sys).x - x;
  }
  EXPECT_NEAR(oracle::sample_variance(diff), 2 * 5e7, 0.01 * 1e8);
  Rng a(4, 4), b(4, 4);
  EXPECT_EQ(heterodyne_intercept(a, 1.0, 2.0, sys).p, heterodyne_intercept(b, 1.0, 2.0, sys).p);
}

TEST(Resend, ReductionsAndShotNoise) {
  SystemParams sys;
  const EveMeasurement eve{1e4, -2e4};
  const auto plain = resend_strategy_a(StrategyA{1.0}, eve, sys);
  EXPECT_DOUBLE_EQ(plain.effective_shot_noise(sys.detector), sys.shot_noise_unit());
  const auto b1 = resend_strategy_b(StrategyB{1.0, sys.channel_transmittance}, eve, sys);
  EXPECT_DOUBLE_EQ(b1.effective_shot_noise(sys.detector), sys.shot_noise_unit());
  EXPECT_DOUBLE_EQ(b1.quad_x, plain.quad_x);
  const auto a10 = resend_strategy_a(StrategyA{10.0}, eve, sys);
  EXPECT_DOUBLE_EQ(a10.lo_intensity, sys.lo_intensity / 10);
}

TEST(Resend, StrategyBShotNoiseScalesWithGamma) {
  auto sys = system_at(0.5);
  sys.modulation_variance = 0;
  const StrategyB b{0.47, 0.5 / 0.47};
  Rng rng(31);
  std::vector<double> ys(1000000);
  for (auto& y : ys) {
    const auto eve = heterodyne_intercept(rng, 0.0, 0.0, sys);
    y = part1_current(rng, resend_strategy_b(b, eve, sys), protocol::Quadrature::X, 0.001, sys);
  }
  const double expected = oracle::part1_b(oracle_at(0.5), 0.47, 0.5 / 0.47, 0.001) - 0;
  EXPECT_NEAR(oracle::sample_variance(ys), 0.47 * 5e7, 0.01 * 0.47 * 5e7);
  EXPECT_NEAR(oracle::sample_variance(ys), expected, 0.01 * expected);
}

TEST(Resend, StrategyAPart1Variance) {
  const auto sys = system_at(0.9);
  const StrategyA a{20.9};
  Rng rng(77);
  std::vector<double> ys(1000000);
  for (auto& y : ys) {
    const double x = protocol::alice_modulate(rng, sys);
    const double p = protocol::alice_modulate(rng, sys);
    y = part1_current(rng, resend_strategy_a(a, heterodyne_intercept(rng, x, p, sys), sys),
                      protocol::Quadrature::X, 1.0, sys);
  }
  const double expected = 0.45 * 7.1 * 5e7 + 5e7 / 20.9;
  EXPECT_NEAR(expected, oracle::part1_a(oracle_at(0.9), 20.9, 1.0), 1e-6);
  EXPECT_NEAR(oracle::sample_variance(ys), expected, 3 * oracle::variance_std_error(ys));
}

TEST(Part2, CancelsAtUnitRatioWithoutShotNoise) {
  physics::DetectorConfig det;
  const auto plan = WavelengthPlan::from_displacement(6886, {}, curve(), det);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_NEAR(inject_part2(rng, plan, 1.0, curve(), det, false).current, 0.0, 1e-8);
  }
}

TEST(Part2, VarianceAndMeanAtLowRatio) {
  physics::DetectorConfig det;
  const auto plan = WavelengthPlan::from_displacement(6886, {}, curve(), det);
  Rng rng(2);
  std::vector<double> xs(1000000);
  int set1 = 0;
  for (auto& x : xs) {
    const auto d = inject_part2(rng, plan, 0.001, curve(), det);
    x = d.current;
    set1 += d.set == 1;
  }
  const double expected = oracle::part2(6886, 0.001);
  EXPECT_NEAR(expected, 4.76e7, 0.01 * 4.76e7);
  EXPECT_NEAR(oracle::sample_variance(xs), expected, 0.01 * expected);
  double mean = 0;
  for (double x : xs) mean += x;
  mean /= double(xs.size());
  EXPECT_NEAR(mean, 0.0, 3 * std::sqrt(expected / double(xs.size())));
  EXPECT_NEAR(set1 / 1e6, 0.5, 3 * 0.5 / 1000);
  EXPECT_NEAR(analysis::part2_variance(plan, curve(), det, 0.001), expected, 1e-9 * expected);
}

TEST(Part2, ZeroMeanAtEveryRatio) {
  physics::DetectorConfig det;
  const auto plan = WavelengthPlan::from_displacement(5000, {}, curve(), det);
  for (double r : {0.001, 0.5, 1.0}) {
    Rng rng(3, static_cast<std::uint64_t>(r * 1000));
    double sum = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) sum += inject_part2(rng, plan, r, curve(), det).current;
    EXPECT_NEAR(sum / n, 0.0, 3 * std::sqrt(oracle::part2(5000, r) / n)) << r;
  }
}

class AttackedSession : public ::testing::TestWithParam<StrategyKind> {};

TEST_P(AttackedSession, MonteCarloMatchesAnalyticPerRatio) {
  const double eta_ch = GetParam() == StrategyKind::A ? 0.9 : 0.5;
  auto sys = system_at(eta_ch);
  sys.schedule = protocol::AttenuationSchedule::three_ratio();
  const auto plan = solve_attack_parameters(GetParam(), sys, curve());
  const auto records = run_attacked_session(sys, plan, curve(), 600000, 5);
  const double d = plan.wavelength.displacement;
  for (double r : {0.001, 0.5, 1.0}) {
    const auto ys = outcomes(records, r);
    const double analytic = analysis::analytic_variance(sys, plan, curve(), r);
    double reference = oracle::part2(d, r);
    if (const auto* a = std::get_if<StrategyA>(&plan.strategy)) {
      reference += oracle::part1_a(oracle_at(eta_ch), a->amplification, r);
    } else {
      const auto& b = std::get<StrategyB>(plan.strategy);
      reference += oracle::part1_b(oracle_at(eta_ch), b.slope_factor, b.fake_channel, r);
    }
    EXPECT_NEAR(analytic, reference, 1e-12 * reference) << r;
    EXPECT_NEAR(oracle::sample_variance(ys), analytic, 3 * oracle::variance_std_error(ys)) << r;
  }
}

TEST_P(AttackedSession, EveNoiseIsTheHeterodynePenalty) {
  const double eta_ch = GetParam() == StrategyKind::A ? 0.9 : 0.5;
  const auto sys = system_at(eta_ch);
  const auto plan = solve_attack_parameters(GetParam(), sys, curve());
  const auto stats = attacked_statistics(sys, plan, curve(), 400000, 9);
  EXPECT_NEAR(stats.eve_noise.variance(), 2 * sys.shot_noise_unit(), 0.01 * 2 * sys.shot_noise_unit());
}

INSTANTIATE_TEST_SUITE_P(Strategies, AttackedSession, ::testing::Values(StrategyKind::A, StrategyKind::B),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(AttackedSession, PlainInterceptResendShowsFullPenalty) {
  const auto sys = system_at(0.999);
  AttackPlan plan;
  plan.strategy = StrategyA{1.0};
  plan.wavelength = WavelengthPlan::from_displacement(0.0, {}, curve(), sys.detector);
  const auto est = analysis::analytic_two_point(sys, plan, curve());
  EXPECT_NEAR(est.shot_noise / sys.shot_noise_unit(), 1.0, 1e-12);
  EXPECT_NEAR(est.excess_noise, 2.1, 1e-9);
  const auto mc = protocol::estimate_two_point(attacked_statistics(sys, plan, curve(), 1000000, 3), sys);
  EXPECT_NEAR(mc.excess_noise_est, 2.1, 0.1);
}

TEST(AttackedSession, CovarianceTransmittanceLooksHonest) {
  const auto sys = system_at(0.9);
  const auto plan = solve_attack_parameters(StrategyKind::A, sys, curve());
  const double eta_hat =
      protocol::estimate_covariance_transmittance(attacked_statistics(sys, plan, curve(), 1000000, 4), sys);
  EXPECT_NEAR(eta_hat, 0.9, 0.03 * 0.9);
}

TEST(AttackedSession, LoCompensation) {
  const auto sys = system_at(0.5);
  auto plan = solve_attack_parameters(StrategyKind::B, sys, curve());
  plan.lo_compensation = true;
  auto stats = attacked_statistics(sys, plan, curve(), 100000, 6);
  EXPECT_NEAR(stats.lo_intensity.mean, sys.lo_intensity, 1e-6 * sys.lo_intensity);
  EXPECT_FALSE(analysis::monitor_lo_intensity(stats.lo_intensity, sys.lo_intensity, 1e-3));
  plan.lo_compensation = false;
  stats = attacked_statistics(sys, plan, curve(), 100000, 6);
  EXPECT_GT(stats.lo_intensity.mean, sys.lo_intensity * (1 + 3e-3));
  EXPECT_TRUE(analysis::monitor_lo_intensity(stats.lo_intensity, sys.lo_intensity, 1e-3));
}

TEST(AttackedSession, Deterministic) {
  const auto sys = system_at(0.9);
  const auto plan = solve_attack_parameters(StrategyKind::A, sys, curve());
  const auto a = run_attacked_session(sys, plan, curve(), 70000, 8, 1);
  const auto b = run_attacked_session(sys, plan, curve(), 70000, 8, 3);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].bob_outcome, b[i].bob_outcome);
    ASSERT_EQ(a[i].part2_set, b[i].part2_set);
  }
}

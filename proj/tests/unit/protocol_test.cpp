#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "cvqkd/errors.hpp"
#include "cvqkd/protocol.hpp"
#include "cvqkd/session.hpp"
#include "oracle.hpp"

using namespace cvqkd;
using namespace cvqkd::protocol;

namespace {

SystemParams to_system(const oracle::Params& p) {
  SystemParams s;
  s.modulation_variance = p.va;
  s.channel_transmittance = p.eta_ch;
  s.excess_noise = p.xi;
  s.detector.efficiency = p.eta;
  s.detector.electronic_noise = p.v_el;
  s.lo_intensity = p.i_lo;
  return s;
}

std::vector<double> outcomes(std::span<const PulseRecord> records, double ratio) {
  std::vector<double> out;
  for (const auto& r : records) {
    if (r.ratio_applied == ratio) out.push_back(r.bob_outcome);
  }
  return out;
}

}  // namespace

TEST(Schedule, Validation) {
  EXPECT_THROW(AttenuationSchedule({}), ConfigError);
  EXPECT_THROW(AttenuationSchedule({{1.0, 0.5}, {0.5, 0.4}}), ConfigError);
  EXPECT_THROW(AttenuationSchedule({{1.0, 0.5}, {1.0, 0.5}}), ConfigError);
  EXPECT_THROW(AttenuationSchedule({{1.5, 1.0}}), ConfigError);
  EXPECT_THROW(AttenuationSchedule({{-0.1, 1.0}}), ConfigError);
  const auto s = AttenuationSchedule::three_ratio();
  EXPECT_EQ(s.size(), 3u);
  EXPECT_DOUBLE_EQ(s.min_ratio(), 0.001);
  EXPECT_DOUBLE_EQ(s.max_ratio(), 1.0);
  EXPECT_TRUE(s.contains(0.5));
  EXPECT_FALSE(s.contains(0.25));
}

TEST(Alice, Modulation) {
  SystemParams p;
  p.modulation_variance = 0;
  Rng zero(3);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(alice_modulate(zero, p), 0.0);

  p.modulation_variance = 5;
  Rng rng(9);
  std::vector<double> xs(1000000);
  for (auto& x : xs) x = alice_modulate(rng, p);
  EXPECT_NEAR(oracle::sample_variance(xs), 2.5e8, 0.01 * 2.5e8);

  Rng a(1, 1), b(1, 1);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(alice_modulate(a, p), alice_modulate(b, p));
}

TEST(Bob, PureShotNoise) {
  SystemParams p;
  p.modulation_variance = 0;
  p.excess_noise = 0;
  Rng rng(4);
  for (double r : {0.001, 1.0}) {
    std::vector<double> ys(400000);
    for (auto& y : ys) y = honest_measure(rng, p, 0.0, r).bob_outcome;
    EXPECT_NEAR(oracle::sample_variance(ys), 5e7, 0.01 * 5e7);
  }
  EXPECT_THROW(honest_measure(rng, p, 0.0, 0.3), ConfigError);
}

TEST(Bob, HonestSessionVarianceAndRegression) {
  SystemParams p;
  p.schedule = AttenuationSchedule({{1.0, 1.0}});
  const auto records = run_honest_session(p, 1000000, 21);
  const auto ys = outcomes(records, 1.0);
  EXPECT_NEAR(oracle::sample_variance(ys), 1.648e8, 0.01 * 1.648e8);
  EXPECT_NEAR(oracle::honest_variance({}, 1.0), 1.6475e8, 1.0);

  double sx = 0, sxy = 0;
  for (const auto& r : records) {
    sx += r.alice_quadrature * r.alice_quadrature;
    sxy += r.alice_quadrature * r.bob_outcome;
  }
  EXPECT_NEAR(sxy / sx, std::sqrt(0.5 * 0.9), 0.01 * std::sqrt(0.45));
}

TEST(Estimator, ExactVariancesRoundTrip) {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 200; ++i) {
    oracle::Params o;
    o.va = 0.5 + 20 * u(gen);
    o.eta_ch = 0.05 + 0.95 * u(gen);
    o.xi = 0.3 * u(gen);
    o.eta = 0.2 + 0.8 * u(gen);
    o.i_lo = std::pow(10, 6 + 3 * u(gen));
    o.v_el = 0.1 * o.n0() * u(gen);
    const double r1 = 0.001 + 0.3 * u(gen);
    const double r2 = 0.6 + 0.4 * u(gen);
    const auto est = two_point_from_variances(oracle::honest_variance(o, r1), oracle::honest_variance(o, r2), r1,
                                              r2, to_system(o));
    EXPECT_NEAR(est.shot_noise / o.n0(), 1.0, 1e-12);
    if (o.xi > 1e-3) EXPECT_NEAR(est.excess_noise / o.xi, 1.0, 1e-9);
    else EXPECT_NEAR(est.excess_noise, o.xi, 1e-12);
    const auto ref = oracle::two_point(o, oracle::honest_variance(o, r1), oracle::honest_variance(o, r2), r1, r2);
    EXPECT_NEAR(ref[0] / o.n0(), 1.0, 1e-12);
  }
  EXPECT_THROW(two_point_from_variances(1, 2, 0.5, 0.5, SystemParams{}), ConfigError);
}

TEST(Estimator, HonestMonteCarlo) {
  SystemParams p;
  const auto report = estimate_two_point(honest_statistics(p, 1000000, 77), p);
  EXPECT_NEAR(report.shot_noise_est / p.shot_noise_unit(), 1.0, 0.01);
  EXPECT_NEAR(report.excess_noise_est, 0.1, 0.05);
  EXPECT_EQ(report.ratio_low, 0.001);
  EXPECT_EQ(report.ratio_high, 1.0);
}

TEST(Estimator, NeedsTwoRatios) {
  SystemParams p;
  p.schedule = AttenuationSchedule({{1.0, 1.0}});
  EXPECT_THROW(estimate_two_point(honest_statistics(p, 1000, 1), p), EstimationError);
}

TEST(Estimator, RecordsAndStreamingAgree) {
  SystemParams p;
  const auto records = run_honest_session(p, 200000, 5);
  const auto a = estimate_two_point(records, p);
  const auto b = estimate_two_point(honest_statistics(p, 200000, 5), p);
  EXPECT_NEAR(a.shot_noise_est, b.shot_noise_est, 1e-9 * b.shot_noise_est);
  EXPECT_NEAR(a.excess_noise_est, b.excess_noise_est, 1e-9);
}

TEST(Estimator, PermutationInvariant) {
  SystemParams p;
  auto records = run_honest_session(p, 100000, 8);
  const auto base = estimate_two_point(records, p);
  const double base_eta = estimate_covariance_transmittance(records, p);
  std::mt19937_64 gen(99);
  for (int k = 0; k < 5; ++k) {
    std::shuffle(records.begin(), records.end(), gen);
    const auto shuffled = estimate_two_point(records, p);
    EXPECT_NEAR(shuffled.shot_noise_est, base.shot_noise_est, 1e-9 * base.shot_noise_est);
    EXPECT_NEAR(shuffled.excess_noise_est, base.excess_noise_est, 1e-8);
    EXPECT_NEAR(estimate_covariance_transmittance(records, p), base_eta, 1e-10);
  }
}

TEST(Estimator, PerQuadratureFilter) {
  SystemParams p;
  const auto records = run_honest_session(p, 200000, 12);
  const auto x = estimate_two_point(records, p, Quadrature::X);
  const auto all = estimate_two_point(records, p);
  EXPECT_LT(x.variance_per_ratio.at(1.0).count, all.variance_per_ratio.at(1.0).count);
  EXPECT_NEAR(x.shot_noise_est / p.shot_noise_unit(), 1.0, 0.03);
}

TEST(CovarianceTransmittance, Honest) {
  SystemParams p;
  EXPECT_NEAR(estimate_covariance_transmittance(honest_statistics(p, 1000000, 31), p), 0.9, 0.02 * 0.9);
  p.modulation_variance = 0;
  EXPECT_THROW(estimate_covariance_transmittance(honest_statistics(p, 10000, 31), p), EstimationError);
  SystemParams low;
  low.schedule = AttenuationSchedule({{0.001, 1.0}});
  EXPECT_THROW(estimate_covariance_transmittance(honest_statistics(low, 1000, 1), low), EstimationError);
}

TEST(Session, ThreadCountDoesNotChangeResults) {
  SystemParams p;
  p.schedule = AttenuationSchedule::three_ratio();
  const auto one = honest_statistics(p, 300000, 17, 1);
  const auto four = honest_statistics(p, 300000, 17, 4);
  ASSERT_EQ(one.per_ratio.size(), four.per_ratio.size());
  for (const auto& [r, m] : one.per_ratio) {
    const auto& o = four.per_ratio.at(r);
    EXPECT_EQ(m.count, o.count);
    EXPECT_EQ(m.m2_y, o.m2_y);
    EXPECT_EQ(m.c_xy, o.c_xy);
  }
  const auto ra = run_honest_session(p, 100000, 3, 1);
  const auto rb = run_honest_session(p, 100000, 3, 3);
  for (std::size_t i = 0; i < ra.size(); ++i) ASSERT_EQ(ra[i].bob_outcome, rb[i].bob_outcome);
}

TEST(Session, SpreadShrinksAsInverseSquareRoot) {
  SystemParams p;
  auto spread = [&](std::uint64_t slots) {
    std::vector<double> xi;
    for (std::uint64_t s = 0; s < 200; ++s) {
      xi.push_back(estimate_two_point(honest_statistics(p, slots, 1000 + s), p).excess_noise_est);
    }
    return std::sqrt(oracle::sample_variance(xi));
  };
  const double ratio = spread(25000) / spread(50000);
  EXPECT_NEAR(ratio, std::sqrt(2.0), 0.2 * std::sqrt(2.0));
}

TEST(Statistics, MergeMatchesSequential) {
  RatioMoments a, b, all;
  std::mt19937_64 gen(1);
  std::normal_distribution<double> n(3, 2);
  for (int i = 0; i < 1000; ++i) {
    const double x = n(gen), y = n(gen) + x;
    (i < 400 ? a : b).add(x, y);
    all.add(x, y);
  }
  a.merge(b);
  EXPECT_EQ(a.count, all.count);
  EXPECT_NEAR(a.variance_y(), all.variance_y(), 1e-12 * all.variance_y());
  EXPECT_NEAR(a.covariance_xy(), all.covariance_xy(), 1e-12 * std::fabs(all.covariance_xy()));
}

#include "cvqkd/attack.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "cvqkd/errors.hpp"
#include "cvqkd/session.hpp"

namespace cvqkd::attack {

using physics::ForeignPulse;
using physics::PulsePath;
using protocol::SystemParams;

namespace {

constexpr double kPlanTolerance = 1e-9;

bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), 1e-300});
}

// Intensity giving displacement `target` (signed) for a pulse on `path`.
double intensity_for(double target, double wavelength, PulsePath path,
                     const physics::BeamSplitterCurve& curve,
                     const physics::DetectorConfig& detector) {
  const double t = physics::transmittance_at(curve, wavelength);
  const double imbalance = path == PulsePath::LocalOscillator ? 2.0 * t - 1.0 : 1.0 - 2.0 * t;
  if (target == 0.0) return 0.0;
  if (imbalance == 0.0 || (imbalance > 0.0) != (target > 0.0)) {
    throw ConfigError(fmt::format(
        "{} nm (T = {}) cannot produce a {} displacement on the {} path", wavelength, t,
        target > 0.0 ? "positive" : "negative",
        path == PulsePath::LocalOscillator ? "LO" : "signal"));
  }
  return target / (detector.efficiency_at(wavelength) * imbalance);
}

struct ExtremeRatios {
  double low;
  double high;
};

ExtremeRatios extreme_ratios(const SystemParams& params) {
  const ExtremeRatios r{params.schedule.min_ratio(), params.schedule.max_ratio()};
  if (r.low == r.high) {
    throw ConfigError(fmt::format("degenerate schedule: r1 == r2 == {}", r.low));
  }
  return r;
}

// Numerator of the design-model excess noise with N0~ = N0; its root in D
// is independent of the strategy.
double excess_numerator(double d, const SystemParams& params, ExtremeRatios r,
                        const ShotNoiseCoefficients& k) {
  const double n0 = params.shot_noise_unit();
  const double gain = params.eta() * params.channel_transmittance;
  return (2.0 + params.excess_noise) * n0 + (r.low + r.high - 2.0) * d * d / gain +
         k.signal * (r.low + r.high) * d;
}

struct DisplacementSolution {
  double displacement;
  double shot_budget;  // N0 minus the Part-2 share of N0~, photo-electrons
};

// Returns nullopt-like NaN displacement when the bracket holds no root.
DisplacementSolution solve_displacement(const SystemParams& params, ExtremeRatios r,
                                        const ShotNoiseCoefficients& k) {
  const double n0 = params.shot_noise_unit();
  double lo = 0.0;
  double hi = std::sqrt(3.0 * n0);
  if (excess_numerator(hi, params, r, k) > 0.0) {
    return {std::numeric_limits<double>::quiet_NaN(), 0.0};
  }
  for (int i = 0; i < 200 && hi - lo > 4 * std::numeric_limits<double>::epsilon() * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (excess_numerator(mid, params, r, k) > 0.0 ? lo : hi) = mid;
  }
  const double d = 0.5 * (lo + hi);
  const double rr = r.low * r.high;
  return {d, n0 - (1.0 - rr) * d * d - (k.lo - k.signal * rr) * d};
}

// Largest eta_ch in (0,1] for which the shot-noise budget stays positive.
double feasibility_boundary(SystemParams params, ExtremeRatios r, const ShotNoiseCoefficients& k) {
  auto budget = [&](double eta_ch) {
    params.channel_transmittance = eta_ch;
    const auto s = solve_displacement(params, r, k);
    return std::isnan(s.displacement) ? -1.0 : s.shot_budget;
  };
  double lo = 1e-9;
  double hi = 1.0;
  if (budget(lo) <= 0.0 || budget(hi) > 0.0) return std::numeric_limits<double>::quiet_NaN();
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    (budget(mid) > 0.0 ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace

std::string_view to_string(StrategyKind kind) noexcept { return kind == StrategyKind::A ? "A" : "B"; }

WavelengthPlan WavelengthPlan::from_displacement(double displacement, const WavelengthChoice& choice,
                                                 const physics::BeamSplitterCurve& curve,
                                                 const physics::DetectorConfig& detector) {
  if (!(displacement >= 0.0)) {
    throw ConfigError(fmt::format("displacement {} must be >= 0", displacement));
  }
  const double d = displacement;
  WavelengthPlan plan;
  plan.displacement = d;
  plan.set1.signal = {choice.signal1,
                      intensity_for(d, choice.signal1, PulsePath::Signal, curve, detector),
                      PulsePath::Signal};
  plan.set1.lo = {choice.lo1, intensity_for(-d, choice.lo1, PulsePath::LocalOscillator, curve, detector),
                  PulsePath::LocalOscillator};
  plan.set2.signal = {choice.signal2,
                      intensity_for(-d, choice.signal2, PulsePath::Signal, curve, detector),
                      PulsePath::Signal};
  plan.set2.lo = {choice.lo2, intensity_for(d, choice.lo2, PulsePath::LocalOscillator, curve, detector),
                  PulsePath::LocalOscillator};
  return plan;
}

WavelengthChoice WavelengthPlan::wavelengths() const noexcept {
  return {set1.signal.wavelength_nm, set1.lo.wavelength_nm, set2.signal.wavelength_nm,
          set2.lo.wavelength_nm};
}

void WavelengthPlan::verify(const physics::BeamSplitterCurve& curve,
                            const physics::DetectorConfig& detector) const {
  if (set1.signal.path != PulsePath::Signal || set2.signal.path != PulsePath::Signal ||
      set1.lo.path != PulsePath::LocalOscillator || set2.lo.path != PulsePath::LocalOscillator) {
    throw PlanConsistencyError("wavelength plan pulses are routed to the wrong ports");
  }
  const double expected[4] = {displacement, -displacement, -displacement, displacement};
  const ForeignPulse* pulses[4] = {&set1.signal, &set1.lo, &set2.signal, &set2.lo};
  for (int i = 0; i < 4; ++i) {
    if (pulses[i]->intensity < 0.0) throw PlanConsistencyError("negative foreign-pulse intensity");
    const double d = physics::foreign_pulse_response(detector, curve, *pulses[i]).mean;
    const bool ok = displacement == 0.0 ? d == 0.0 : close_rel(d, expected[i], kPlanTolerance);
    if (!ok) {
      throw PlanConsistencyError(fmt::format(
          "pulse at {} nm displaces by {:.10g}, expected {:.10g}", pulses[i]->wavelength_nm, d,
          expected[i]));
    }
  }
}

ShotNoiseCoefficients shot_noise_coefficients(const physics::BeamSplitterCurve& curve,
                                              const WavelengthChoice& choice) {
  auto t = [&](double wl) { return physics::transmittance_at(curve, wl); };
  // eta*I = |D| / |imbalance|, averaged over the two equiprobable sets.
  const double lo1 = -1.0 / (2.0 * t(choice.lo1) - 1.0);
  const double lo2 = 1.0 / (2.0 * t(choice.lo2) - 1.0);
  const double s1 = 1.0 / (1.0 - 2.0 * t(choice.signal1));
  const double s2 = -1.0 / (1.0 - 2.0 * t(choice.signal2));
  if (lo1 <= 0.0 || lo2 <= 0.0 || s1 <= 0.0 || s2 <= 0.0) {
    throw ConfigError("wavelength choice cannot realise the displacement pattern D, -D, -D, D");
  }
  return {0.5 * (lo1 + lo2), 0.5 * (s1 + s2)};
}

StrategyKind AttackPlan::kind() const noexcept {
  return std::holds_alternative<StrategyA>(strategy) ? StrategyKind::A : StrategyKind::B;
}

void AttackPlan::validate(const SystemParams& params, const physics::BeamSplitterCurve& curve) const {
  if (const auto* a = std::get_if<StrategyA>(&strategy)) {
    if (!(a->amplification >= 1.0)) {
      throw PlanConsistencyError(fmt::format("amplification N = {} must be >= 1", a->amplification));
    }
  } else {
    const auto& b = std::get<StrategyB>(strategy);
    if (!(b.slope_factor > 0.0 && b.slope_factor <= 1.0)) {
      throw PlanConsistencyError(fmt::format("slope factor {} outside (0,1]", b.slope_factor));
    }
    if (!(b.fake_channel > 0.0)) {
      throw PlanConsistencyError(fmt::format("fake channel {} must be > 0", b.fake_channel));
    }
    if (!close_rel(b.slope_factor * b.fake_channel, params.channel_transmittance, kPlanTolerance)) {
      throw PlanConsistencyError(fmt::format("gamma * eta'_ch = {:.12g} differs from eta_ch = {:.12g}",
                                             b.slope_factor * b.fake_channel,
                                             params.channel_transmittance));
    }
  }
  wavelength.verify(curve, params.detector);
}

EveMeasurement heterodyne_intercept(Rng& rng, double alice_x, double alice_p,
                                    const SystemParams& params) {
  const double penalty = 2.0 * params.shot_noise_unit();
  const double x = alice_x + rng.normal(0.0, penalty);
  const double p = alice_p + rng.normal(0.0, penalty);
  return {x, p};
}

ResentState resend_strategy_a(const StrategyA& plan, const EveMeasurement& eve,
                              const SystemParams& params) {
  const double n = plan.amplification;
  const double scale = std::sqrt(n * params.channel_transmittance / params.shot_noise_unit());
  ResentState s;
  s.signal_amplitude_scale = std::sqrt(n);
  s.quad_x = scale * eve.x;
  s.quad_p = scale * eve.p;
  s.quad_noise = n * params.channel_transmittance * params.excess_noise;
  s.lo_intensity = params.lo_intensity / n;
  s.response_slope = 1.0;
  return s;
}

ResentState resend_strategy_b(const StrategyB& plan, const EveMeasurement& eve,
                              const SystemParams& params) {
  if (!close_rel(plan.slope_factor * plan.fake_channel, params.channel_transmittance, kPlanTolerance)) {
    throw PlanConsistencyError(fmt::format("gamma * eta'_ch = {:.12g} differs from eta_ch = {:.12g}",
                                           plan.slope_factor * plan.fake_channel,
                                           params.channel_transmittance));
  }
  const double scale = std::sqrt(plan.fake_channel / params.shot_noise_unit());
  ResentState s;
  s.quad_x = scale * eve.x;
  s.quad_p = scale * eve.p;
  s.quad_noise = plan.fake_channel * params.excess_noise;
  s.lo_intensity = params.lo_intensity;
  s.response_slope = plan.slope_factor;
  return s;
}

double part1_current(Rng& rng, const ResentState& state, protocol::Quadrature quadrature,
                     double ratio, const SystemParams& params) {
  const double quad = quadrature == protocol::Quadrature::X ? state.quad_x : state.quad_p;
  const auto m = physics::balanced_homodyne_stats(params.detector, state.lo_intensity,
                                                  std::sqrt(ratio) * quad, ratio * state.quad_noise);
  return std::sqrt(state.response_slope) * rng.normal(m.mean, m.variance);
}

Part2Draw inject_part2(Rng& rng, const WavelengthPlan& plan, double ratio,
                       const physics::BeamSplitterCurve& curve,
                       const physics::DetectorConfig& detector, bool with_shot_noise) {
  const int set = rng.coin() ? 2 : 1;
  const auto& pair = plan.set(set);
  auto lo = physics::foreign_pulse_response(detector, curve, pair.lo);
  auto sig = physics::foreign_pulse_response(detector, curve, pair.signal);
  if (!with_shot_noise) lo.variance = sig.variance = 0.0;
  const double i_lo = physics::sample_foreign_current(rng, lo).value;
  const double i_s = physics::sample_foreign_current(rng, sig).value;
  return {i_lo + ratio * i_s, set, pair.lo.intensity};
}

protocol::PulseRecord attacked_slot(const SystemParams& params, const AttackPlan& plan,
                                    const physics::BeamSplitterCurve& curve,
                                    std::uint64_t master_seed, std::uint64_t slot) {
  Rng rng(master_seed, slot);
  const auto quad = rng.coin() ? protocol::Quadrature::P : protocol::Quadrature::X;
  const double ratio = params.schedule.entries()[params.schedule.sample_index(rng.uniform())].ratio;
  const double x = protocol::alice_modulate(rng, params);
  const double p = protocol::alice_modulate(rng, params);

  const auto eve = heterodyne_intercept(rng, x, p, params);
  const ResentState resent = std::visit(
      [&](const auto& s) {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, StrategyA>) {
          return resend_strategy_a(s, eve, params);
        } else {
          return resend_strategy_b(s, eve, params);
        }
      },
      plan.strategy);

  const double part1 = part1_current(rng, resent, quad, ratio, params);
  const auto part2 = inject_part2(rng, plan.wavelength, ratio, curve, params.detector);
  const double electronic = rng.normal(0.0, params.v_el());

  protocol::PulseRecord rec;
  rec.slot_index = slot;
  rec.quadrature = quad;
  rec.ratio_applied = ratio;
  rec.alice_quadrature = quad == protocol::Quadrature::X ? x : p;
  rec.bob_outcome = part1 + part2.current + electronic;
  rec.eve_quadrature = quad == protocol::Quadrature::X ? eve.x : eve.p;
  rec.part2_set = part2.set;
  const double part1_lo = resent.lo_intensity - (plan.lo_compensation ? part2.lo_intensity : 0.0);
  rec.lo_intensity = part1_lo + part2.lo_intensity;
  return rec;
}

std::vector<protocol::PulseRecord> run_attacked_session(const SystemParams& params,
                                                        const AttackPlan& plan,
                                                        const physics::BeamSplitterCurve& curve,
                                                        std::uint64_t slots,
                                                        std::uint64_t master_seed,
                                                        unsigned threads) {
  params.validate();
  plan.validate(params, curve);
  return protocol::generate_records(slots, threads, [&](std::uint64_t k) {
    return attacked_slot(params, plan, curve, master_seed, k);
  });
}

protocol::SessionStatistics attacked_statistics(const SystemParams& params, const AttackPlan& plan,
                                                const physics::BeamSplitterCurve& curve,
                                                std::uint64_t slots, std::uint64_t master_seed,
                                                unsigned threads) {
  params.validate();
  plan.validate(params, curve);
  return protocol::accumulate_statistics(slots, threads, [&](std::uint64_t k) {
    return attacked_slot(params, plan, curve, master_seed, k);
  });
}

protocol::TwoPointEstimate design_estimates(const SystemParams& params, const AttackPlan& plan,
                                            const physics::BeamSplitterCurve& curve) {
  const auto r = extreme_ratios(params);
  const auto k = shot_noise_coefficients(curve, plan.wavelength.wavelengths());
  const double n0 = params.shot_noise_unit();
  const double d = plan.wavelength.displacement;
  const double gain = params.eta() * params.channel_transmittance;

  double part1_shot = 0.0;
  double slope_ratio = 1.0;  // part-1 signal slope relative to the honest one
  if (const auto* a = std::get_if<StrategyA>(&plan.strategy)) {
    part1_shot = n0 / a->amplification;
  } else {
    const auto& b = std::get<StrategyB>(plan.strategy);
    part1_shot = b.slope_factor * n0;
    slope_ratio = b.slope_factor * b.fake_channel / params.channel_transmittance;
  }

  const double rr = r.low * r.high;
  protocol::TwoPointEstimate est;
  est.shot_noise = part1_shot + (1.0 - rr) * d * d + (k.lo - k.signal * rr) * d;
  est.excess_noise =
      (slope_ratio * (params.modulation_variance + 2.0 + params.excess_noise) * n0 -
       params.modulation_variance * est.shot_noise + (r.low + r.high - 2.0) * d * d / gain +
       k.signal * (r.low + r.high) * d) /
      est.shot_noise;
  return est;
}

AttackPlan solve_attack_parameters(StrategyKind kind, const SystemParams& params,
                                   const physics::BeamSplitterCurve& curve,
                                   const WavelengthChoice& choice) {
  params.validate();
  const auto r = extreme_ratios(params);
  const auto k = shot_noise_coefficients(curve, choice);
  const double n0 = params.shot_noise_unit();

  const auto sol = solve_displacement(params, r, k);
  if (std::isnan(sol.displacement)) {
    throw InfeasibleError(
        fmt::format("no displacement D in [0, sqrt(3 N0)] = [0, {:.6g}] cancels the excess noise",
                    std::sqrt(3.0 * n0)),
        "excess-noise cancellation", feasibility_boundary(params, r, k));
  }
  if (!(sol.shot_budget > 0.0)) {
    const double boundary = feasibility_boundary(params, r, k);
    throw InfeasibleError(
        fmt::format("strategy {}: Part 2 alone contributes {:.6g} of N0 = {:.6g} to the estimated "
                    "shot noise, leaving no room for {} (feasible for eta_ch < {:.6f})",
                    to_string(kind), n0 - sol.shot_budget, n0,
                    kind == StrategyKind::A ? "N0/N with finite N" : "gamma*N0 with gamma > 0",
                    boundary),
        kind == StrategyKind::A ? "N0 - (1-r1 r2) D^2 - (k_lo - k_s r1 r2) D > 0 (N finite)"
                                : "gamma > 0",
        boundary);
  }

  AttackPlan plan;
  plan.wavelength = WavelengthPlan::from_displacement(sol.displacement, choice, curve, params.detector);
  if (kind == StrategyKind::A) {
    plan.strategy = StrategyA{n0 / sol.shot_budget};
  } else {
    const double gamma = sol.shot_budget / n0;
    plan.strategy = StrategyB{gamma, params.channel_transmittance / gamma};
  }
  plan.validate(params, curve);
  return plan;
}

}  // namespace cvqkd::attack

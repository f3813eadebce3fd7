#pragma once

// Eve's toolkit: full intercept-resend (Part 1, strategies A and B) combined
// with off-wavelength pulse injection into Bob's signal and LO ports
// (Part 2), plus the solver choosing her parameters.

#include <cstdint>
#include <string_view>
#include <variant>
#include <vector>

#include "cvqkd/physics.hpp"
#include "cvqkd/protocol.hpp"
#include "cvqkd/random.hpp"

namespace cvqkd::attack {

enum class StrategyKind { A, B };

std::string_view to_string(StrategyKind kind) noexcept;

/// Signal amplitude scaled up by sqrt(N), LO amplitude scaled down by
/// sqrt(N): the realistic shot noise drops to N0/N. N = 1 is plain
/// intercept-resend.
struct StrategyA {
  double amplification = 1.0;
};

/// LO-calibration attack: the detection slope drops by gamma while the
/// resent signal emulates channel transmittance eta'_ch, with
/// gamma * eta'_ch = eta_ch.
struct StrategyB {
  double slope_factor = 1.0;
  double fake_channel = 1.0;
};

/// The four injection wavelengths (nm).
struct WavelengthChoice {
  double signal1 = 1410.0;
  double lo1 = 1490.0;
  double signal2 = 1310.0;
  double lo2 = 1590.0;
};

struct WavelengthSet {
  physics::ForeignPulse signal;
  physics::ForeignPulse lo;
};

/// Two equiprobable pulse pairs whose displacements satisfy
/// D_s1 = -D_lo1 = -D_s2 = D_lo2 = D.
struct WavelengthPlan {
  WavelengthSet set1;
  WavelengthSet set2;
  double displacement = 0.0;  // D, photo-electrons

  /// Inverts D = eta * |1 - 2T| * I for each pulse. Throws ConfigError when a
  /// wavelength's coupler imbalance has the wrong sign for its role.
  static WavelengthPlan from_displacement(double displacement, const WavelengthChoice& choice,
                                          const physics::BeamSplitterCurve& curve,
                                          const physics::DetectorConfig& detector);

  WavelengthChoice wavelengths() const noexcept;
  const WavelengthSet& set(int index) const noexcept { return index == 1 ? set1 : set2; }
  /// Throws PlanConsistencyError unless the four displacements agree with D
  /// to 1e-9 relative.
  void verify(const physics::BeamSplitterCurve& curve, const physics::DetectorConfig& detector) const;
};

/// eta*<I_lo> = lo*D and eta*<I_s> = signal*D for a displacement-balanced
/// wavelength plan. Depends only on the coupler transmittances.
struct ShotNoiseCoefficients {
  double lo = 0.0;
  double signal = 0.0;
};

ShotNoiseCoefficients shot_noise_coefficients(const physics::BeamSplitterCurve& curve,
                                              const WavelengthChoice& choice);

struct AttackPlan {
  std::variant<StrategyA, StrategyB> strategy;
  WavelengthPlan wavelength;
  /// Eve lowers her Part-1 LO by the injected LO-path intensity so Bob's LO
  /// monitor reads the plan value.
  bool lo_compensation = true;

  StrategyKind kind() const noexcept;
  /// Throws PlanConsistencyError on N < 1, gamma outside (0,1],
  /// eta'_ch <= 0, gamma*eta'_ch != eta_ch, or a broken wavelength plan.
  void validate(const protocol::SystemParams& params, const physics::BeamSplitterCurve& curve) const;
};

struct EveMeasurement {
  double x = 0.0;  // X_E, same normalisation as Alice's quadratures
  double p = 0.0;  // P_E
};

/// Heterodyne measurement of Alice's state: each quadrature picks up 2 N0
/// of noise.
EveMeasurement heterodyne_intercept(Rng& rng, double alice_x, double alice_p,
                                    const protocol::SystemParams& params);

/// State Eve sends to Bob, as seen at Bob's input before attenuation.
struct ResentState {
  double quad_x = 0.0;               // coherent amplitude quadratures, shot-noise units
  double quad_p = 0.0;
  double quad_noise = 0.0;           // added Gaussian noise emulating the channel, SNU
  double lo_intensity = 0.0;         // photo-electrons
  double response_slope = 1.0;       // gamma
  double signal_amplitude_scale = 1.0;

  double effective_shot_noise(const physics::DetectorConfig& detector) const noexcept {
    return response_slope * detector.efficiency * lo_intensity;
  }
};

ResentState resend_strategy_a(const StrategyA& plan, const EveMeasurement& eve,
                              const protocol::SystemParams& params);
/// Throws PlanConsistencyError when gamma * eta'_ch != eta_ch.
ResentState resend_strategy_b(const StrategyB& plan, const EveMeasurement& eve,
                              const protocol::SystemParams& params);

/// Bob's Part-1 differential current for the resent state.
double part1_current(Rng& rng, const ResentState& state, protocol::Quadrature quadrature,
                     double ratio, const protocol::SystemParams& params);

struct Part2Draw {
  double current = 0.0;
  int set = 1;
  double lo_intensity = 0.0;  // LO-path foreign intensity
};

/// LO-path contribution plus ratio times the signal-path contribution of one
/// uniformly chosen pulse pair. `with_shot_noise = false` returns the
/// deterministic displacements only.
Part2Draw inject_part2(Rng& rng, const WavelengthPlan& plan, double ratio,
                       const physics::BeamSplitterCurve& curve,
                       const physics::DetectorConfig& detector, bool with_shot_noise = true);

/// One attacked slot derived from (master_seed, slot).
protocol::PulseRecord attacked_slot(const protocol::SystemParams& params, const AttackPlan& plan,
                                    const physics::BeamSplitterCurve& curve,
                                    std::uint64_t master_seed, std::uint64_t slot);

std::vector<protocol::PulseRecord> run_attacked_session(const protocol::SystemParams& params,
                                                        const AttackPlan& plan,
                                                        const physics::BeamSplitterCurve& curve,
                                                        std::uint64_t slots,
                                                        std::uint64_t master_seed,
                                                        unsigned threads = 1);

protocol::SessionStatistics attacked_statistics(const protocol::SystemParams& params,
                                                const AttackPlan& plan,
                                                const physics::BeamSplitterCurve& curve,
                                                std::uint64_t slots, std::uint64_t master_seed,
                                                unsigned threads = 1);

/// Shot-noise and excess-noise estimates in the attacker's closed-form
/// design model, evaluated at the schedule's extreme ratios. This model
/// keeps the signal-path shot-noise term of the excess noise unscaled by
/// 1/(eta*eta_ch), which is what the solver zeroes.
protocol::TwoPointEstimate design_estimates(const protocol::SystemParams& params,
                                            const AttackPlan& plan,
                                            const physics::BeamSplitterCurve& curve);

/// Solves {N0~ = N0, xi~ = 0} of the design model: bisection for D on
/// [0, sqrt(3 N0)], then N (strategy A) or gamma (strategy B) in closed
/// form. Throws InfeasibleError naming the violated constraint.
AttackPlan solve_attack_parameters(StrategyKind kind, const protocol::SystemParams& params,
                                   const physics::BeamSplitterCurve& curve,
                                   const WavelengthChoice& choice = {});

}  // namespace cvqkd::attack

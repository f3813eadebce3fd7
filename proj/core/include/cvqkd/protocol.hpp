#pragma once

// Honest Gaussian-modulated coherent-state session with Bob's real-time
// shot-noise measurement (random signal-path attenuation).
//
// Scaling convention: Alice's quadrature x is stored in photo-electron
// normalisation, <x^2> = V_A * N0 with N0 = eta * I_LO. Bob's outcome y is the
// differential current, so <xy> = sqrt(eta * eta_ch) * V_A * N0 at ratio 1.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "cvqkd/physics.hpp"
#include "cvqkd/random.hpp"

namespace cvqkd::protocol {

enum class Quadrature : std::uint8_t { X, P };

char quadrature_code(Quadrature q) noexcept;

/// Discrete distribution of signal-path attenuation ratios.
class AttenuationSchedule {
 public:
  struct Entry {
    double ratio;
    double probability;
  };

  /// Throws ConfigError unless ratios lie in [0,1] and are pairwise distinct,
  /// probabilities lie in [0,1] and sum to 1 within 1e-12.
  explicit AttenuationSchedule(std::vector<Entry> entries);

  /// Two-point real-time measurement (r1, r2) with equal probability.
  static AttenuationSchedule two_point(double r1 = 0.001, double r2 = 1.0);
  /// Three-ratio countermeasure schedule {1: 90%, 0.5: 5%, 0.001: 5%}.
  static AttenuationSchedule three_ratio();

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool contains(double ratio) const noexcept;
  /// Index of `ratio` in entries(); throws ConfigError when not scheduled.
  std::size_t index_of(double ratio) const;
  double min_ratio() const noexcept;
  double max_ratio() const noexcept;
  /// Inverse-CDF draw from a uniform u in [0,1).
  std::size_t sample_index(double u) const noexcept;

 private:
  std::vector<Entry> entries_;
  std::vector<double> cumulative_;
};

struct SystemParams {
  double modulation_variance = 5.0;    // V_A, shot-noise units
  double channel_transmittance = 0.9;  // eta_ch
  double excess_noise = 0.1;           // xi, shot-noise units (channel input)
  physics::DetectorConfig detector;
  double lo_intensity = 1e8;           // I_LO, photo-electrons
  AttenuationSchedule schedule = AttenuationSchedule::two_point();

  double shot_noise_unit() const noexcept { return detector.efficiency * lo_intensity; }
  double eta() const noexcept { return detector.efficiency; }
  double v_el() const noexcept { return detector.electronic_noise; }
  void validate() const;
};

/// One protocol slot.
struct PulseRecord {
  std::uint64_t slot_index = 0;
  Quadrature quadrature = Quadrature::X;
  double ratio_applied = 1.0;
  double alice_quadrature = 0.0;
  double bob_outcome = 0.0;
  // Attack annotations; honest slots keep the defaults.
  double lo_intensity = 0.0;  // intensity reaching Bob's LO port
  double eve_quadrature = std::numeric_limits<double>::quiet_NaN();
  int part2_set = 0;          // 0 = none, 1 or 2 = wavelength set used
};

/// Normal(0, V_A * N0).
double alice_modulate(Rng& rng, const SystemParams& params);

/// Bob's attenuated homodyne outcome for Alice's quadrature `alice_x`.
/// Throws ConfigError when `ratio` is not in the schedule.
PulseRecord honest_measure(Rng& rng, const SystemParams& params, double alice_x, double ratio,
                           Quadrature quadrature = Quadrature::X, std::uint64_t slot = 0);

/// Full honest slot derived from (master_seed, slot).
PulseRecord honest_slot(const SystemParams& params, std::uint64_t master_seed, std::uint64_t slot);

/// Running moments of Alice/Bob data at a single attenuation ratio.
struct RatioMoments {
  std::uint64_t count = 0;
  double mean_x = 0.0;
  double mean_y = 0.0;
  double m2_x = 0.0;
  double m2_y = 0.0;
  double c_xy = 0.0;

  void add(double x, double y) noexcept;
  void merge(const RatioMoments& other) noexcept;
  double variance_y() const noexcept { return count > 1 ? m2_y / double(count - 1) : 0.0; }
  double variance_x() const noexcept { return count > 1 ? m2_x / double(count - 1) : 0.0; }
  double covariance_xy() const noexcept { return count > 1 ? c_xy / double(count - 1) : 0.0; }
};

/// Single-variable running mean/variance.
struct RunningMoments {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double v) noexcept;
  void merge(const RunningMoments& other) noexcept;
  double variance() const noexcept { return count > 1 ? m2 / double(count - 1) : 0.0; }
};

/// Reduction of a session: per-ratio moments plus attack annotations.
struct SessionStatistics {
  std::map<double, RatioMoments> per_ratio;
  RunningMoments lo_intensity;
  RunningMoments eve_noise;  // eve_quadrature - alice_quadrature

  void add(const PulseRecord& record);
  void merge(const SessionStatistics& other);

  static SessionStatistics from_records(std::span<const PulseRecord> records,
                                        std::optional<Quadrature> only = std::nullopt);
};

struct RatioVariance {
  double sample_variance = 0.0;
  std::uint64_t count = 0;
};

struct EstimatorReport {
  std::map<double, RatioVariance> variance_per_ratio;
  double ratio_low = 0.0;
  double ratio_high = 0.0;
  double shot_noise_est = 0.0;    // N0~, photo-electrons
  double excess_noise_est = 0.0;  // xi~, units of N0~
  double covariance_xy = 0.0;     // at ratio_high
};

struct TwoPointEstimate {
  double shot_noise = 0.0;
  double excess_noise = 0.0;
};

/// Inverts the two-ratio variance model V(r) = r*eta*eta_ch*(V_A+xi)*N0 + N0 + v_el.
/// Throws ConfigError when r_low == r_high.
TwoPointEstimate two_point_from_variances(double v_low, double v_high, double r_low,
                                          double r_high, const SystemParams& known);

/// Excess noise with N0 taken as known (no attenuation-based calibration),
/// from the variance observed at ratio r. Shot-noise units.
double excess_noise_known_shot_noise(double variance, double ratio, const SystemParams& known);

/// Shot-noise and excess-noise estimates from the extreme scheduled ratios.
/// Throws EstimationError with fewer than two distinct ratios or fewer than
/// two records at either extreme.
EstimatorReport estimate_two_point(const SessionStatistics& stats, const SystemParams& known);
EstimatorReport estimate_two_point(std::span<const PulseRecord> records, const SystemParams& known,
                                   std::optional<Quadrature> only = std::nullopt);

/// eta_ch estimate (<xy> / (V_A N0))^2 / eta from ratio-1 data.
double estimate_covariance_transmittance(const SessionStatistics& stats, const SystemParams& known);
double estimate_covariance_transmittance(std::span<const PulseRecord> records,
                                         const SystemParams& known);

}  // namespace cvqkd::protocol

#pragma once

// Beam-splitter transmittance tables and the Gaussian-moment model of
// (un)balanced homodyne detection. Intensities and currents are counted in
// photo-electrons throughout (amplification q = 1).

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cvqkd/random.hpp"

namespace cvqkd::physics {

struct CurvePoint {
  double wavelength_nm;
  double transmittance;
};

/// Wavelength -> transmittance table for one fused biconical taper coupler.
class BeamSplitterCurve {
 public:
  /// Throws ConfigError unless wavelengths are strictly increasing and all
  /// transmittances lie in (0, 1). At least one point is required.
  BeamSplitterCurve(std::string nominal_ratio, std::vector<CurvePoint> points);

  /// Measured 10:90 coupler (1270-1610 nm, 20 nm grid).
  static const BeamSplitterCurve& coupler_10_90();
  /// Measured 50:50 coupler (1270-1610 nm, 20 nm grid).
  static const BeamSplitterCurve& coupler_50_50();
  /// "10:90" / "50:50" resolve to the built-in tables; anything else is read
  /// as a path in the plain-text table format.
  static BeamSplitterCurve resolve(std::string_view name_or_path);

  static BeamSplitterCurve load(const std::filesystem::path& path);
  /// Text format: one header line (optionally carrying "ratio=<label>"),
  /// then "wavelength_nm transmittance" rows in ascending wavelength.
  static BeamSplitterCurve parse(std::string_view text, std::string fallback_label = "custom");
  std::string to_text() const;

  const std::string& nominal_ratio() const noexcept { return nominal_ratio_; }
  const std::vector<CurvePoint>& points() const noexcept { return points_; }
  double min_wavelength() const noexcept { return points_.front().wavelength_nm; }
  double max_wavelength() const noexcept { return points_.back().wavelength_nm; }
  bool covers(double wavelength_nm) const noexcept {
    return wavelength_nm >= min_wavelength() && wavelength_nm <= max_wavelength();
  }

 private:
  std::string nominal_ratio_;
  std::vector<CurvePoint> points_;
};

/// Exact at tabulated wavelengths, linear in between. Throws RangeError
/// naming the valid band when the wavelength is outside the table.
double transmittance_at(const BeamSplitterCurve& curve, double wavelength_nm);

struct DetectorConfig {
  double efficiency = 0.5;        // eta, dimensionless
  double electronic_noise = 0.0;  // v_el, photo-electrons^2
  double amplification = 1.0;     // q
  /// Optional per-wavelength efficiency; the flat value applies elsewhere.
  std::map<double, double> efficiency_overrides;

  double efficiency_at(double wavelength_nm) const;
  /// Throws ConfigError on eta outside (0,1], v_el < 0 or q != 1.
  void validate() const;
};

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

/// T = 1/2 homodyne: mean eta*alpha_LO*<X>, variance eta*V*N0 + N0 with
/// N0 = eta*I_LO. Quadrature statistics are in shot-noise units, with
/// quad_variance the part above vacuum. Electronic noise is not included.
Moments balanced_homodyne_stats(const DetectorConfig& detector, double lo_intensity,
                                double quad_mean, double quad_variance);

/// General-T homodyne with a vacuum signal plus <X^2> (shot-noise units).
/// The deterministic LO imbalance eta*(2T-1)*I is returned as the mean; its
/// square is not part of the variance.
Moments unbalanced_variance(const DetectorConfig& detector, double transmittance,
                            double lo_intensity, double quad_second_moment);

enum class PulsePath { Signal, LocalOscillator };

/// Off-wavelength pulse injected into one of Bob's two input ports.
struct ForeignPulse {
  double wavelength_nm = 0.0;
  double intensity = 0.0;  // photo-electrons
  PulsePath path = PulsePath::Signal;
};

/// Differential-current displacement and shot-noise variance produced by a
/// foreign pulse. The shot-noise variance is eta*I independently of T.
Moments foreign_pulse_response(const DetectorConfig& detector, const BeamSplitterCurve& curve,
                               const ForeignPulse& pulse);

/// Differential current (photo-electrons), the homodyne observable.
struct HomodyneSample {
  double value = 0.0;
};

HomodyneSample sample_foreign_current(Rng& rng, const Moments& response);

}  // namespace cvqkd::physics

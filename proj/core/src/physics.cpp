#include "cvqkd/physics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "cvqkd/errors.hpp"

namespace cvqkd::physics {

namespace {

// Transmittance of the two couplers on a 20 nm grid, 1270-1610 nm.
constexpr double kGrid[] = {1270, 1290, 1310, 1330, 1350, 1370, 1390, 1410, 1430,
                            1450, 1470, 1490, 1510, 1530, 1550, 1570, 1590, 1610};
constexpr double kT1090[] = {0.9050, 0.9066, 0.9020, 0.8978, 0.9014, 0.8991,
                             0.8985, 0.8938, 0.8940, 0.8985, 0.8989, 0.8985,
                             0.9012, 0.8995, 0.8956, 0.9026, 0.9022, 0.9060};
constexpr double kT5050[] = {0.5327, 0.5253, 0.5144, 0.5052, 0.5011, 0.4965,
                             0.4931, 0.4862, 0.4902, 0.4885, 0.4908, 0.4873,
                             0.4954, 0.4960, 0.5012, 0.5069, 0.5155, 0.5265};

BeamSplitterCurve make_builtin(std::string label, const double (&values)[18]) {
  std::vector<CurvePoint> points;
  points.reserve(18);
  for (std::size_t i = 0; i < 18; ++i) points.push_back({kGrid[i], values[i]});
  return BeamSplitterCurve(std::move(label), std::move(points));
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace

BeamSplitterCurve::BeamSplitterCurve(std::string nominal_ratio, std::vector<CurvePoint> points)
    : nominal_ratio_(std::move(nominal_ratio)), points_(std::move(points)) {
  if (points_.empty()) throw ConfigError("beam-splitter curve has no points");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& p = points_[i];
    if (!(p.transmittance > 0.0 && p.transmittance < 1.0)) {
      throw ConfigError(fmt::format("transmittance {} at {} nm is outside (0,1)",
                                    p.transmittance, p.wavelength_nm));
    }
    if (i > 0 && !(p.wavelength_nm > points_[i - 1].wavelength_nm)) {
      throw ConfigError(fmt::format("wavelengths must be strictly increasing ({} after {})",
                                    p.wavelength_nm, points_[i - 1].wavelength_nm));
    }
  }
}

const BeamSplitterCurve& BeamSplitterCurve::coupler_10_90() {
  static const BeamSplitterCurve curve = make_builtin("10:90", kT1090);
  return curve;
}

const BeamSplitterCurve& BeamSplitterCurve::coupler_50_50() {
  static const BeamSplitterCurve curve = make_builtin("50:50", kT5050);
  return curve;
}

BeamSplitterCurve BeamSplitterCurve::resolve(std::string_view name_or_path) {
  if (name_or_path == "50:50") return coupler_50_50();
  if (name_or_path == "10:90") return coupler_10_90();
  return load(std::filesystem::path(name_or_path));
}

BeamSplitterCurve BeamSplitterCurve::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open beam-splitter table '{}'", path.string()));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path.stem().string());
}

BeamSplitterCurve BeamSplitterCurve::parse(std::string_view text, std::string fallback_label) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("beam-splitter table is empty");

  std::string label = std::move(fallback_label);
  if (const auto pos = line.find("ratio="); pos != std::string::npos) {
    std::istringstream tok(line.substr(pos + 6));
    tok >> label;
  }

  std::vector<CurvePoint> points;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line);
    if (body.empty()) continue;
    std::istringstream row(body);
    CurvePoint p{};
    std::string extra;
    if (!(row >> p.wavelength_nm >> p.transmittance) || (row >> extra)) {
      throw ConfigError(fmt::format("line {}: expected 'wavelength_nm transmittance', got '{}'",
                                    line_no, body));
    }
    points.push_back(p);
  }
  return BeamSplitterCurve(std::move(label), std::move(points));
}

std::string BeamSplitterCurve::to_text() const {
  std::string out = fmt::format("# ratio={} wavelength_nm transmittance\n", nominal_ratio_);
  for (const auto& p : points_) out += fmt::format("{} {:.4f}\n", p.wavelength_nm, p.transmittance);
  return out;
}

double transmittance_at(const BeamSplitterCurve& curve, double wavelength_nm) {
  if (!curve.covers(wavelength_nm)) {
    throw RangeError(fmt::format("wavelength {} nm outside the {} coupler band [{}, {}] nm",
                                 wavelength_nm, curve.nominal_ratio(), curve.min_wavelength(),
                                 curve.max_wavelength()));
  }
  const auto& pts = curve.points();
  const auto hi = std::lower_bound(pts.begin(), pts.end(), wavelength_nm,
                                   [](const CurvePoint& p, double w) { return p.wavelength_nm < w; });
  if (hi->wavelength_nm == wavelength_nm) return hi->transmittance;
  const auto lo = std::prev(hi);
  const double t = (wavelength_nm - lo->wavelength_nm) / (hi->wavelength_nm - lo->wavelength_nm);
  return lo->transmittance + t * (hi->transmittance - lo->transmittance);
}

double DetectorConfig::efficiency_at(double wavelength_nm) const {
  if (const auto it = efficiency_overrides.find(wavelength_nm); it != efficiency_overrides.end()) {
    return it->second;
  }
  return efficiency;
}

void DetectorConfig::validate() const {
  if (!(efficiency > 0.0 && efficiency <= 1.0)) {
    throw ConfigError(fmt::format("detector efficiency {} outside (0,1]", efficiency));
  }
  if (!(electronic_noise >= 0.0)) {
    throw ConfigError(fmt::format("electronic noise {} must be >= 0", electronic_noise));
  }
  if (amplification != 1.0) throw ConfigError("amplification q must be 1");
  for (const auto& [wl, eta] : efficiency_overrides) {
    if (!(eta > 0.0 && eta <= 1.0)) {
      throw ConfigError(fmt::format("efficiency override {} at {} nm outside (0,1]", eta, wl));
    }
  }
}

Moments balanced_homodyne_stats(const DetectorConfig& detector, double lo_intensity,
                                double quad_mean, double quad_variance) {
  if (!(lo_intensity > 0.0)) {
    throw DomainError(fmt::format("LO intensity must be positive, got {}", lo_intensity));
  }
  const double eta = detector.efficiency;
  const double n0 = eta * lo_intensity;
  const double alpha_lo = std::sqrt(lo_intensity);
  return {eta * alpha_lo * quad_mean, eta * quad_variance * n0 + n0};
}

Moments unbalanced_variance(const DetectorConfig& detector, double transmittance,
                            double lo_intensity, double quad_second_moment) {
  if (!(transmittance > 0.0 && transmittance < 1.0)) {
    throw DomainError(fmt::format("transmittance {} outside (0,1)", transmittance));
  }
  if (!(lo_intensity > 0.0)) {
    throw DomainError(fmt::format("LO intensity must be positive, got {}", lo_intensity));
  }
  const double eta = detector.efficiency;
  const double t = transmittance;
  const double imbalance = 2.0 * t - 1.0;
  const double lo2 = lo_intensity;  // alpha_LO^2
  const double variance = eta * eta * lo2 * imbalance * imbalance +
                          4.0 * eta * eta * lo2 * t * (1.0 - t) * (quad_second_moment + 1.0) +
                          eta * (1.0 - eta) * lo2;
  return {eta * lo2 * imbalance, variance};
}

Moments foreign_pulse_response(const DetectorConfig& detector, const BeamSplitterCurve& curve,
                               const ForeignPulse& pulse) {
  const double t = transmittance_at(curve, pulse.wavelength_nm);
  const double eta = detector.efficiency_at(pulse.wavelength_nm);
  const double imbalance = pulse.path == PulsePath::LocalOscillator ? 2.0 * t - 1.0 : 1.0 - 2.0 * t;
  // eta*(2T-1)^2 + 4*eta*T*(1-T) + 1 - eta == 1
  return {eta * imbalance * pulse.intensity, eta * pulse.intensity};
}

HomodyneSample sample_foreign_current(Rng& rng, const Moments& response) {
  return {rng.normal(response.mean, response.variance)};
}

}  // namespace cvqkd::physics

#pragma once

// Scenario files: sectioned "key = value" text. Unknown sections or keys are
// errors. Units: intensities in photo-electrons, noises in shot-noise units.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cvqkd/attack.hpp"
#include "cvqkd/protocol.hpp"

namespace cvqkd::cli {

enum class AttackMode { None, A, B };

struct AttackSpec {
  AttackMode mode = AttackMode::None;
  bool solve = true;
  double amplification = 1.0;   // N, strategy A without solving
  double slope_factor = 1.0;    // gamma, strategy B without solving
  double displacement = 0.0;    // D without solving
  attack::WavelengthChoice wavelengths;
  bool lo_compensation = true;
  std::string plan_path;        // replay a saved plan instead
};

struct DetectSpec {
  double threshold = 0.05;
  double lo_tolerance = 1e-3;   // relative
  double band_center_nm = 1550.0;
  double band_half_width_nm = 0.0;  // 0 disables the band check
};

struct SweepSpec {
  std::string variable = "eta_ch";  // eta_ch | xi | N
  double from = 0.8;
  double to = 0.95;
  std::uint64_t points = 20;
  std::uint64_t mc_slots = 100000;
};

struct Scenario {
  protocol::SystemParams system;
  std::string coupler = "50:50";
  AttackSpec attack;
  std::uint64_t slots = 1000000;
  std::uint64_t seed = 1;
  std::vector<std::string> outputs{"report", "polynomial", "verdict"};
  DetectSpec detect;
  SweepSpec sweep;

  bool wants(std::string_view output) const;
  /// Normalised text of every setting except the seed; hashed into artifact headers.
  std::string canonical() const;
  std::string hash() const;
};

/// Throws ConfigError as "<origin>:<line>: message".
Scenario parse_scenario(std::string_view text, std::string_view origin = "scenario");
Scenario load_scenario(const std::filesystem::path& path);

/// Throws ConfigError for semantic problems (slots = 0, bad schedule, ...).
void validate(const Scenario& scenario);

}  // namespace cvqkd::cli

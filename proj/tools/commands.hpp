#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cvqkd/analysis.hpp"
#include "cvqkd/attack.hpp"
#include "cvqkd/physics.hpp"
#include "cvqkd/protocol.hpp"
#include "scenario.hpp"

namespace cvqkd::cli {

struct RunOptions {
  std::filesystem::path out_dir = ".";
  unsigned threads = 1;
};

struct RunSummary {
  protocol::EstimatorReport report;
  std::optional<analysis::NoisePolynomial> polynomial;
  std::optional<analysis::DetectionVerdict> verdict;
  std::optional<attack::AttackPlan> plan;
  std::vector<std::filesystem::path> written;
};

/// Attack plan requested by the scenario (solved, replayed or built from
/// its scalars); nullopt for honest scenarios.
std::optional<attack::AttackPlan> resolve_plan(const Scenario& scenario,
                                               const protocol::SystemParams& system,
                                               const physics::BeamSplitterCurve& curve);

RunSummary cmd_run(const Scenario& scenario, const RunOptions& options, std::ostream& log);

/// Writes plan.txt and returns the plan.
attack::AttackPlan cmd_solve(const Scenario& scenario, const RunOptions& options, std::ostream& log);

struct SweepRow {
  double eta_ch = 0.0;
  double xi = 0.0;
  double amplification = 0.0;
  double slope_factor = 0.0;
  double displacement = 0.0;
  double shot_noise_ratio = 0.0;       // N0~ / N0
  double excess_noise_two_point = 0.0; // xi~
  double excess_noise_known_unit = 0.0;
  double a = 0.0, b = 0.0, c = 0.0, a_over_c = 0.0;
  std::string verdict;
  double mc_excess_noise_known_unit = 0.0;
  double mc_sigma = 0.0;
  double mc_a_over_c = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::optional<double> zero_crossing;  // of excess_noise_known_unit
};

SweepResult cmd_sweep(const Scenario& scenario, bool monte_carlo, const RunOptions& options,
                      std::ostream& log);

/// Polynomial + verdict from a records CSV, or from simulating the scenario
/// when `records_path` is empty.
analysis::DetectionVerdict cmd_detect(const Scenario& scenario,
                                      const std::filesystem::path& records_path,
                                      const RunOptions& options, std::ostream& log);

}  // namespace cvqkd::cli

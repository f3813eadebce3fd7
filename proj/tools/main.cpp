#include <cstdlib>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "commands.hpp"
#include "cvqkd/errors.hpp"
#include "scenario.hpp"

namespace {

enum ExitCode : int { kOk = 0, kUsage = 2, kConfig = 3, kInfeasible = 4, kRuntime = 5 };

struct CommonFlags {
  std::string scenario_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> slots;
  std::string strategy;
  std::string out_dir = ".";
  unsigned threads = 1;
};

void add_common(CLI::App& cmd, CommonFlags& flags) {
  cmd.add_option("-s,--scenario", flags.scenario_path, "Scenario file")->check(CLI::ExistingFile);
  cmd.add_option("--seed", flags.seed, "Override the master seed");
  cmd.add_option("--slots", flags.slots, "Override the number of pulse slots");
  cmd.add_option("--strategy", flags.strategy, "Override the attack: none, A or B")
      ->check(CLI::IsMember({"none", "A", "B"}));
  cmd.add_option("-o,--out", flags.out_dir, "Output directory");
  cmd.add_option("-j,--threads", flags.threads, "Worker threads")->check(CLI::PositiveNumber);
}

cvqkd::cli::Scenario load(const CommonFlags& flags) {
  using cvqkd::cli::AttackMode;
  auto s = flags.scenario_path.empty() ? cvqkd::cli::Scenario{}
                                       : cvqkd::cli::load_scenario(flags.scenario_path);
  if (flags.seed) s.seed = *flags.seed;
  if (flags.slots) s.slots = *flags.slots;
  if (flags.strategy == "none") s.attack.mode = AttackMode::None;
  if (flags.strategy == "A") s.attack.mode = AttackMode::A;
  if (flags.strategy == "B") s.attack.mode = AttackMode::B;
  return s;
}

cvqkd::cli::RunOptions options(const CommonFlags& flags) { return {flags.out_dir, flags.threads}; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CV-QKD homodyne wavelength-attack simulator"};
  app.require_subcommand(1);

  CommonFlags run_flags, solve_flags, sweep_flags, detect_flags;
  auto* run = app.add_subcommand("run", "Simulate a session and write estimator artifacts");
  add_common(*run, run_flags);

  auto* solve = app.add_subcommand("solve", "Solve the attack parameters and write plan.txt");
  add_common(*solve, solve_flags);

  auto* sweep = app.add_subcommand("sweep", "Sweep one parameter and write sweep.csv");
  add_common(*sweep, sweep_flags);
  bool monte_carlo = false;
  sweep->add_flag("--mc,!--analytic", monte_carlo, "Add Monte-Carlo columns (default analytic only)");

  auto* detect = app.add_subcommand("detect", "Fit the noise polynomial and decide attacked/clean");
  add_common(*detect, detect_flags);
  std::string records_path;
  detect->add_option("--records", records_path, "records.csv to analyse instead of simulating")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*run) {
      cvqkd::cli::cmd_run(load(run_flags), options(run_flags), std::cout);
    } else if (*solve) {
      cvqkd::cli::cmd_solve(load(solve_flags), options(solve_flags), std::cout);
    } else if (*sweep) {
      cvqkd::cli::cmd_sweep(load(sweep_flags), monte_carlo, options(sweep_flags), std::cout);
    } else if (*detect) {
      cvqkd::cli::cmd_detect(load(detect_flags), records_path, options(detect_flags), std::cout);
    }
  } catch (const cvqkd::InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kInfeasible;
  } catch (const cvqkd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}

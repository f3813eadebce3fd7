#include "commands.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "cvqkd/errors.hpp"
#include "cvqkd/io.hpp"
#include "cvqkd/session.hpp"

namespace cvqkd::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

io::ArtifactHeader header_for(const Scenario& s) { return {"", io::kFormatVersion, s.hash(), s.seed}; }

fs::path write_text(const fs::path& dir, std::string_view name, const std::string& content) {
  fs::create_directories(dir);
  const fs::path path = dir / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(fmt::format("cannot write '{}'", path.string()));
  out << content;
  return path;
}

protocol::SlotGenerator make_generator(const Scenario& s, const std::optional<attack::AttackPlan>& plan,
                                       const physics::BeamSplitterCurve& curve, std::uint64_t seed) {
  if (plan) {
    return [&s, &plan, &curve, seed](std::uint64_t k) {
      return attack::attacked_slot(s.system, *plan, curve, seed, k);
    };
  }
  return [&s, seed](std::uint64_t k) { return protocol::honest_slot(s.system, seed, k); };
}

std::optional<bool> band_check(const Scenario& s, const std::optional<attack::AttackPlan>& plan) {
  if (s.detect.band_half_width_nm <= 0.0) return std::nullopt;
  if (!plan) return false;
  return analysis::wavelength_band_violation(plan->wavelength, s.detect.band_center_nm,
                                             s.detect.band_half_width_nm);
}

double lo_reference(const protocol::SystemParams& system) { return system.lo_intensity; }

}  // namespace

std::optional<attack::AttackPlan> resolve_plan(const Scenario& scenario,
                                               const protocol::SystemParams& system,
                                               const physics::BeamSplitterCurve& curve) {
  const auto& spec = scenario.attack;
  if (spec.mode == AttackMode::None) return std::nullopt;

  attack::AttackPlan plan;
  if (!spec.plan_path.empty()) {
    std::ifstream in(spec.plan_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    plan = io::plan_from_kv(io::KvDocument::parse(buf.str()));
  } else if (spec.solve) {
    const auto kind = spec.mode == AttackMode::A ? attack::StrategyKind::A : attack::StrategyKind::B;
    plan = attack::solve_attack_parameters(kind, system, curve, spec.wavelengths);
    plan.lo_compensation = spec.lo_compensation;
  } else {
    if (spec.mode == AttackMode::A) {
      plan.strategy = attack::StrategyA{spec.amplification};
    } else {
      plan.strategy = attack::StrategyB{spec.slope_factor, system.channel_transmittance / spec.slope_factor};
    }
    plan.wavelength = attack::WavelengthPlan::from_displacement(spec.displacement, spec.wavelengths,
                                                                curve, system.detector);
    plan.lo_compensation = spec.lo_compensation;
  }
  plan.validate(system, curve);
  return plan;
}

RunSummary cmd_run(const Scenario& scenario, const RunOptions& options, std::ostream& log) {
  validate(scenario);
  const auto curve = physics::BeamSplitterCurve::resolve(scenario.coupler);
  RunSummary summary;
  summary.plan = resolve_plan(scenario, scenario.system, curve);
  const auto gen = make_generator(scenario, summary.plan, curve, scenario.seed);
  const auto header = header_for(scenario);

  if (scenario.wants("records")) {
    const auto records = protocol::generate_records(scenario.slots, options.threads, gen);
    fs::create_directories(options.out_dir);
    const fs::path path = options.out_dir / "records.csv";
    std::ofstream out(path, std::ios::binary);
    io::write_records_csv(out, records, header);
    summary.written.push_back(path);
  }

  const auto stats = protocol::accumulate_statistics(scenario.slots, options.threads, gen);
  summary.report = protocol::estimate_two_point(stats, scenario.system);
  const double n0 = scenario.system.shot_noise_unit();
  fmt::print(log, "shot_noise_est / N0 = {:.6f}\n", summary.report.shot_noise_est / n0);
  fmt::print(log, "excess_noise_est = {:.6f}\n", summary.report.excess_noise_est);
  if (scenario.wants("report")) {
    summary.written.push_back(
        write_text(options.out_dir, "report.txt", io::to_kv(summary.report, header).to_string()));
  }

  if (scenario.system.schedule.size() >= 3) {
    summary.polynomial = analysis::fit_noise_polynomial(stats);
    const bool lo_anomaly = analysis::monitor_lo_intensity(stats.lo_intensity, lo_reference(scenario.system),
                                                           scenario.detect.lo_tolerance);
    summary.verdict = analysis::detect(*summary.polynomial, scenario.detect.threshold, lo_anomaly,
                                       band_check(scenario, summary.plan));
    fmt::print(log, "a/c = {:.6f}\nattacked = {}\n", summary.polynomial->a_over_c(),
               summary.verdict->attacked);
    if (scenario.wants("polynomial")) {
      summary.written.push_back(write_text(options.out_dir, "polynomial.txt",
                                           io::to_kv(*summary.polynomial, header).to_string()));
    }
    if (scenario.wants("verdict")) {
      summary.written.push_back(
          write_text(options.out_dir, "verdict.txt", io::to_kv(*summary.verdict, header).to_string()));
    }
  } else if (scenario.wants("polynomial") || scenario.wants("verdict")) {
    fmt::print(log, "note: countermeasure needs 3 ratios; schedule has {}, no polynomial/verdict\n",
               scenario.system.schedule.size());
  }

  if (scenario.wants("plan") && summary.plan) {
    summary.written.push_back(
        write_text(options.out_dir, "plan.txt", io::to_kv(*summary.plan, header).to_string()));
  }
  return summary;
}

attack::AttackPlan cmd_solve(const Scenario& scenario, const RunOptions& options, std::ostream& log) {
  validate(scenario);
  if (scenario.attack.mode == AttackMode::None) {
    throw ConfigError("attack.strategy: solve needs strategy A or B");
  }
  const auto curve = physics::BeamSplitterCurve::resolve(scenario.coupler);
  const auto kind = scenario.attack.mode == AttackMode::A ? attack::StrategyKind::A : attack::StrategyKind::B;
  auto plan = attack::solve_attack_parameters(kind, scenario.system, curve, scenario.attack.wavelengths);
  plan.lo_compensation = scenario.attack.lo_compensation;

  fmt::print(log, "strategy = {}\n", attack::to_string(kind));
  if (const auto* a = std::get_if<attack::StrategyA>(&plan.strategy)) {
    fmt::print(log, "N = {:.6f}\n", a->amplification);
  } else {
    const auto& b = std::get<attack::StrategyB>(plan.strategy);
    fmt::print(log, "gamma = {:.6f}\neta_ch' = {:.6f}\n", b.slope_factor, b.fake_channel);
  }
  fmt::print(log, "D = {:.6f}\n", plan.wavelength.displacement);
  for (int set : {1, 2}) {
    const auto& pair = plan.wavelength.set(set);
    fmt::print(log, "I_s{} = {:.6e} at {} nm\nI_lo{} = {:.6e} at {} nm\n", set, pair.signal.intensity,
               pair.signal.wavelength_nm, set, pair.lo.intensity, pair.lo.wavelength_nm);
  }
  const auto est = attack::design_estimates(scenario.system, plan, curve);
  fmt::print(log, "design N0~/N0 - 1 = {:.3e}\ndesign xi~ = {:.3e}\n",
             est.shot_noise / scenario.system.shot_noise_unit() - 1.0, est.excess_noise);
  write_text(options.out_dir, "plan.txt", io::to_kv(plan, header_for(scenario)).to_string());
  return plan;
}

namespace {

Scenario with_variable(Scenario s, const std::string& variable, double value) {
  if (variable == "eta_ch") {
    s.system.channel_transmittance = value;
  } else if (variable == "xi") {
    s.system.excess_noise = value;
  } else {
    s.attack.amplification = value;
  }
  return s;
}

// Known-unit excess noise of the scenario evaluated analytically.
double known_unit_excess(const Scenario& s, const physics::BeamSplitterCurve& curve) {
  const double r = s.system.schedule.max_ratio();
  const auto plan = resolve_plan(s, s.system, curve);
  if (plan) return analysis::known_unit_excess_noise(s.system, *plan, curve, r);
  return protocol::excess_noise_known_shot_noise(analysis::analytic_variance(s.system, r), r, s.system);
}

SweepRow sweep_row(const Scenario& s, const physics::BeamSplitterCurve& curve, bool monte_carlo,
                   std::uint64_t seed, unsigned threads) {
  SweepRow row;
  row.eta_ch = s.system.channel_transmittance;
  row.xi = s.system.excess_noise;
  row.amplification = row.slope_factor = row.displacement = kNaN;
  row.mc_excess_noise_known_unit = row.mc_sigma = row.mc_a_over_c = kNaN;
  row.a = row.b = row.c = row.a_over_c = kNaN;

  std::optional<attack::AttackPlan> plan;
  try {
    plan = resolve_plan(s, s.system, curve);
  } catch (const InfeasibleError&) {
    row.shot_noise_ratio = row.excess_noise_two_point = row.excess_noise_known_unit = kNaN;
    row.verdict = "infeasible";
    return row;
  }

  const double n0 = s.system.shot_noise_unit();
  const double r_max = s.system.schedule.max_ratio();
  if (plan) {
    if (const auto* a = std::get_if<attack::StrategyA>(&plan->strategy)) {
      row.amplification = a->amplification;
    } else {
      row.slope_factor = std::get<attack::StrategyB>(plan->strategy).slope_factor;
    }
    row.displacement = plan->wavelength.displacement;
  }
  const auto est = plan ? analysis::analytic_two_point(s.system, *plan, curve)
                        : analysis::analytic_two_point(s.system);
  row.shot_noise_ratio = est.shot_noise / n0;
  row.excess_noise_two_point = est.excess_noise;
  row.excess_noise_known_unit = known_unit_excess(s, curve);

  const bool curvature = s.system.schedule.size() >= 3;
  if (curvature) {
    const auto poly = plan ? analysis::analytic_noise_polynomial(s.system, *plan, curve)
                           : analysis::analytic_noise_polynomial(s.system);
    row.a = poly.a;
    row.b = poly.b;
    row.c = poly.c;
    row.a_over_c = poly.a_over_c();
    row.verdict = analysis::detect(poly, s.detect.threshold).attacked ? "attacked" : "clean";
  } else {
    row.verdict = "n/a";
  }

  if (monte_carlo) {
    const auto gen = make_generator(s, plan, curve, seed);
    const auto stats = protocol::accumulate_statistics(s.sweep.mc_slots, threads, gen);
    const auto it = stats.per_ratio.find(r_max);
    if (it != stats.per_ratio.end() && it->second.count > 1) {
      const double v = it->second.variance_y();
      const double gain = r_max * s.system.eta() * s.system.channel_transmittance * n0;
      row.mc_excess_noise_known_unit = protocol::excess_noise_known_shot_noise(v, r_max, s.system);
      row.mc_sigma = v * std::sqrt(2.0 / double(it->second.count - 1)) / gain;
    }
    if (curvature && stats.per_ratio.size() >= 3) {
      row.mc_a_over_c = analysis::fit_noise_polynomial(stats).a_over_c();
    }
  }
  return row;
}

std::string sweep_csv(const std::vector<SweepRow>& rows, bool monte_carlo, const io::ArtifactHeader& h) {
  io::ArtifactHeader header = h;
  header.kind = "sweep";
  std::string out = header.to_line() + "\n";
  out += "eta_ch,xi,N,gamma,D,shot_noise_ratio,excess_noise_two_point,excess_noise_known_unit,a,b,c,a_over_c,verdict";
  out += monte_carlo ? ",mc_excess_noise_known_unit,mc_sigma,mc_a_over_c\n" : "\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}", r.eta_ch, r.xi, r.amplification,
                       r.slope_factor, r.displacement, r.shot_noise_ratio, r.excess_noise_two_point,
                       r.excess_noise_known_unit, r.a, r.b, r.c, r.a_over_c, r.verdict);
    if (monte_carlo) {
      out += fmt::format(",{},{},{}", r.mc_excess_noise_known_unit, r.mc_sigma, r.mc_a_over_c);
    }
    out += "\n";
  }
  return out;
}

}  // namespace

SweepResult cmd_sweep(const Scenario& scenario, bool monte_carlo, const RunOptions& options,
                      std::ostream& log) {
  validate(scenario);
  const auto curve = physics::BeamSplitterCurve::resolve(scenario.coupler);
  const auto& sw = scenario.sweep;
  std::vector<double> grid;
  for (std::uint64_t i = 0; i < sw.points; ++i) {
    grid.push_back(sw.points == 1 ? sw.from
                                  : sw.from + (sw.to - sw.from) * double(i) / double(sw.points - 1));
  }

  SweepResult result;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto s = with_variable(scenario, sw.variable, grid[i]);
    result.rows.push_back(sweep_row(s, curve, monte_carlo, scenario.seed + i, options.threads));
  }

  for (std::size_t i = 1; i < grid.size() && !result.zero_crossing; ++i) {
    const double f0 = result.rows[i - 1].excess_noise_known_unit;
    const double f1 = result.rows[i].excess_noise_known_unit;
    if (!std::isfinite(f0) || !std::isfinite(f1) || (f0 > 0.0) == (f1 > 0.0)) continue;
    double lo = grid[i - 1];
    double hi = grid[i];
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double fm = known_unit_excess(with_variable(scenario, sw.variable, mid), curve);
      ((fm > 0.0) == (f0 > 0.0) ? lo : hi) = mid;
    }
    result.zero_crossing = 0.5 * (lo + hi);
  }

  write_text(options.out_dir, "sweep.csv", sweep_csv(result.rows, monte_carlo, header_for(scenario)));
  fmt::print(log, "{} rows written to {}\n", result.rows.size(), (options.out_dir / "sweep.csv").string());
  if (result.zero_crossing) {
    fmt::print(log, "known-unit excess noise crosses zero at {} = {:.6f}\n", sw.variable, *result.zero_crossing);
  }
  return result;
}

analysis::DetectionVerdict cmd_detect(const Scenario& scenario, const fs::path& records_path,
                                      const RunOptions& options, std::ostream& log) {
  validate(scenario);
  const auto curve = physics::BeamSplitterCurve::resolve(scenario.coupler);
  const auto plan = resolve_plan(scenario, scenario.system, curve);

  protocol::SessionStatistics stats;
  io::ArtifactHeader header = header_for(scenario);
  std::optional<bool> lo_anomaly;
  if (!records_path.empty()) {
    std::ifstream in(records_path);
    if (!in) throw ConfigError(fmt::format("cannot open records '{}'", records_path.string()));
    const auto records = io::read_records_csv(in, &header);
    stats = protocol::SessionStatistics::from_records(records);
  } else {
    stats = protocol::accumulate_statistics(scenario.slots, options.threads,
                                            make_generator(scenario, plan, curve, scenario.seed));
    lo_anomaly = analysis::monitor_lo_intensity(stats.lo_intensity, lo_reference(scenario.system),
                                                scenario.detect.lo_tolerance);
  }

  const auto poly = analysis::fit_noise_polynomial(stats);
  const auto verdict = analysis::detect(poly, scenario.detect.threshold, lo_anomaly, band_check(scenario, plan));
  write_text(options.out_dir, "polynomial.txt", io::to_kv(poly, header).to_string());
  write_text(options.out_dir, "verdict.txt", io::to_kv(verdict, header).to_string());
  fmt::print(log, "a = {:.6e}\nb = {:.6e}\nc = {:.6e}\na/c = {:.6f}\nattacked = {}\n", poly.a, poly.b,
             poly.c, poly.a_over_c(), verdict.attacked);
  return verdict;
}

}  // namespace cvqkd::cli

#include "scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "cvqkd/errors.hpp"
#include "cvqkd/io.hpp"

namespace cvqkd::cli {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    auto part = trim(s.substr(start, pos - start));
    if (!part.empty()) parts.push_back(std::move(part));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

double to_double(const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw ConfigError(fmt::format("'{}' is not a number", v));
  return d;
}

std::uint64_t to_count(const std::string& v) {
  const double d = to_double(v);
  if (d < 0 || d != std::floor(d) || d > 1.8e19) {
    throw ConfigError(fmt::format("'{}' is not a non-negative integer", v));
  }
  return static_cast<std::uint64_t>(d);
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ConfigError(fmt::format("'{}' is not a boolean", v));
}

protocol::AttenuationSchedule to_schedule(const std::string& v) {
  std::vector<protocol::AttenuationSchedule::Entry> entries;
  for (const auto& item : split(v, ',')) {
    const auto parts = split(item, ':');
    if (parts.size() != 2) throw ConfigError(fmt::format("schedule entry '{}' is not ratio:probability", item));
    entries.push_back({to_double(parts[0]), to_double(parts[1])});
  }
  return protocol::AttenuationSchedule(std::move(entries));
}

attack::WavelengthChoice to_wavelengths(const std::string& v) {
  const auto parts = split(v, ',');
  if (parts.size() != 4) {
    throw ConfigError("wavelengths needs four values: signal1, lo1, signal2, lo2 (nm)");
  }
  return {to_double(parts[0]), to_double(parts[1]), to_double(parts[2]), to_double(parts[3])};
}

AttackMode to_mode(const std::string& v) {
  if (v == "none") return AttackMode::None;
  if (v == "A") return AttackMode::A;
  if (v == "B") return AttackMode::B;
  throw ConfigError(fmt::format("strategy '{}' must be none, A or B", v));
}

using Setter = std::function<void(Scenario&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"system.modulation_variance", [](Scenario& s, const std::string& v) { s.system.modulation_variance = to_double(v); }},
      {"system.channel_transmittance", [](Scenario& s, const std::string& v) { s.system.channel_transmittance = to_double(v); }},
      {"system.excess_noise", [](Scenario& s, const std::string& v) { s.system.excess_noise = to_double(v); }},
      {"system.detector_efficiency", [](Scenario& s, const std::string& v) { s.system.detector.efficiency = to_double(v); }},
      {"system.electronic_noise", [](Scenario& s, const std::string& v) { s.system.detector.electronic_noise = to_double(v); }},
      {"system.lo_intensity", [](Scenario& s, const std::string& v) { s.system.lo_intensity = to_double(v); }},
      {"system.schedule", [](Scenario& s, const std::string& v) { s.system.schedule = to_schedule(v); }},
      {"system.coupler", [](Scenario& s, const std::string& v) { s.coupler = v; }},
      {"attack.strategy", [](Scenario& s, const std::string& v) { s.attack.mode = to_mode(v); }},
      {"attack.solve", [](Scenario& s, const std::string& v) { s.attack.solve = to_bool(v); }},
      {"attack.amplification", [](Scenario& s, const std::string& v) { s.attack.amplification = to_double(v); }},
      {"attack.slope_factor", [](Scenario& s, const std::string& v) { s.attack.slope_factor = to_double(v); }},
      {"attack.displacement", [](Scenario& s, const std::string& v) { s.attack.displacement = to_double(v); }},
      {"attack.wavelengths", [](Scenario& s, const std::string& v) { s.attack.wavelengths = to_wavelengths(v); }},
      {"attack.lo_compensation", [](Scenario& s, const std::string& v) { s.attack.lo_compensation = to_bool(v); }},
      {"attack.plan", [](Scenario& s, const std::string& v) { s.attack.plan_path = v; }},
      {"run.slots", [](Scenario& s, const std::string& v) { s.slots = to_count(v); }},
      {"run.seed", [](Scenario& s, const std::string& v) { s.seed = to_count(v); }},
      {"run.outputs", [](Scenario& s, const std::string& v) { s.outputs = split(v, ','); }},
      {"detect.threshold", [](Scenario& s, const std::string& v) { s.detect.threshold = to_double(v); }},
      {"detect.lo_tolerance", [](Scenario& s, const std::string& v) { s.detect.lo_tolerance = to_double(v); }},
      {"detect.band_center_nm", [](Scenario& s, const std::string& v) { s.detect.band_center_nm = to_double(v); }},
      {"detect.band_half_width_nm", [](Scenario& s, const std::string& v) { s.detect.band_half_width_nm = to_double(v); }},
      {"sweep.variable", [](Scenario& s, const std::string& v) { s.sweep.variable = v; }},
      {"sweep.from", [](Scenario& s, const std::string& v) { s.sweep.from = to_double(v); }},
      {"sweep.to", [](Scenario& s, const std::string& v) { s.sweep.to = to_double(v); }},
      {"sweep.points", [](Scenario& s, const std::string& v) { s.sweep.points = to_count(v); }},
      {"sweep.mc_slots", [](Scenario& s, const std::string& v) { s.sweep.mc_slots = to_count(v); }},
  };
  return table;
}

// Short spellings accepted for the most used keys.
const std::map<std::string, std::string>& aliases() {
  static const std::map<std::string, std::string> table = {
      {"system.eta_ch", "system.channel_transmittance"},
      {"system.xi", "system.excess_noise"},
      {"system.v_a", "system.modulation_variance"},
      {"system.eta", "system.detector_efficiency"},
      {"system.v_el", "system.electronic_noise"},
      {"system.i_lo", "system.lo_intensity"},
      {"attack.n", "attack.amplification"},
      {"attack.gamma", "attack.slope_factor"},
      {"attack.d", "attack.displacement"},
  };
  return table;
}

constexpr std::string_view kOutputs[] = {"records", "report", "polynomial", "verdict", "plan"};

}  // namespace

bool Scenario::wants(std::string_view output) const {
  return std::find(outputs.begin(), outputs.end(), output) != outputs.end();
}

std::string Scenario::canonical() const {
  using io::format_number;
  std::string out;
  auto line = [&](std::string_view key, const std::string& value) {
    out += fmt::format("{} = {}\n", key, value);
  };
  const auto& sys = system;
  line("system.modulation_variance", format_number(sys.modulation_variance));
  line("system.channel_transmittance", format_number(sys.channel_transmittance));
  line("system.excess_noise", format_number(sys.excess_noise));
  line("system.detector_efficiency", format_number(sys.detector.efficiency));
  line("system.electronic_noise", format_number(sys.detector.electronic_noise));
  line("system.lo_intensity", format_number(sys.lo_intensity));
  std::string sched;
  for (const auto& e : sys.schedule.entries()) {
    sched += fmt::format("{}{}:{}", sched.empty() ? "" : ",", format_number(e.ratio), format_number(e.probability));
  }
  line("system.schedule", sched);
  line("system.coupler", coupler);
  constexpr std::string_view modes[] = {"none", "A", "B"};
  line("attack.strategy", std::string(modes[static_cast<int>(attack.mode)]));
  line("attack.solve", attack.solve ? "true" : "false");
  line("attack.amplification", format_number(attack.amplification));
  line("attack.slope_factor", format_number(attack.slope_factor));
  line("attack.displacement", format_number(attack.displacement));
  const auto& w = attack.wavelengths;
  line("attack.wavelengths", fmt::format("{},{},{},{}", format_number(w.signal1), format_number(w.lo1),
                                         format_number(w.signal2), format_number(w.lo2)));
  line("attack.lo_compensation", attack.lo_compensation ? "true" : "false");
  line("attack.plan", attack.plan_path);
  line("run.slots", std::to_string(slots));
  std::string outs;
  for (const auto& o : outputs) outs += (outs.empty() ? "" : ",") + o;
  line("run.outputs", outs);
  line("detect.threshold", format_number(detect.threshold));
  line("detect.lo_tolerance", format_number(detect.lo_tolerance));
  line("detect.band_center_nm", format_number(detect.band_center_nm));
  line("detect.band_half_width_nm", format_number(detect.band_half_width_nm));
  line("sweep.variable", sweep.variable);
  line("sweep.from", format_number(sweep.from));
  line("sweep.to", format_number(sweep.to));
  line("sweep.points", std::to_string(sweep.points));
  line("sweep.mc_slots", std::to_string(sweep.mc_slots));
  return out;
}

std::string Scenario::hash() const { return io::content_hash(canonical()); }

Scenario parse_scenario(std::string_view text, std::string_view origin) {
  Scenario scenario;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::string section;
  std::map<std::string, int> seen;
  int line_no = 0;
  auto fail = [&](const std::string& msg) {
    return ConfigError(fmt::format("{}:{}: {}", origin, line_no, msg));
  };
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw fail(fmt::format("malformed section header '{}'", line));
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (section != "system" && section != "attack" && section != "run" && section != "detect" &&
          section != "sweep") {
        throw fail(fmt::format("unknown section [{}]", section));
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw fail(fmt::format("expected 'key = value', got '{}'", line));
    if (section.empty()) throw fail("key outside of any section");
    std::string key = section + "." + trim(std::string_view(line).substr(0, eq));
    if (const auto alias = aliases().find(key); alias != aliases().end()) key = alias->second;
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw fail(fmt::format("unknown key '{}'", key));
    if (const auto prev = seen.find(key); prev != seen.end()) {
      throw fail(fmt::format("duplicate key '{}' (first set on line {})", key, prev->second));
    }
    seen[key] = line_no;
    try {
      it->second(scenario, value);
    } catch (const ConfigError& e) {
      throw fail(fmt::format("{}: {}", key, e.what()));
    }
  }

  try {
    validate(scenario);
  } catch (const ConfigError& e) {
    // Point at the offending key when the message names one.
    std::string msg = e.what();
    line_no = 0;
    for (const auto& [key, ln] : seen) {
      if (msg.starts_with(key + ":")) line_no = ln;
    }
    throw fail(msg);
  }
  return scenario;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open scenario '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path.string());
}

void validate(const Scenario& s) {
  auto check = [](bool ok, std::string_view key, const std::string& msg) {
    if (!ok) throw ConfigError(fmt::format("{}: {}", key, msg));
  };
  try {
    s.system.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("system: {}", e.what()));
  }
  check(s.slots > 0, "run.slots", "must be > 0");
  for (const auto& o : s.outputs) {
    check(std::find(std::begin(kOutputs), std::end(kOutputs), o) != std::end(kOutputs), "run.outputs",
          fmt::format("unknown output '{}' (records, report, polynomial, verdict, plan)", o));
  }
  check(s.detect.threshold > 0.0, "detect.threshold", "must be > 0");
  check(s.detect.lo_tolerance >= 0.0, "detect.lo_tolerance", "must be >= 0");
  check(s.detect.band_half_width_nm >= 0.0, "detect.band_half_width_nm", "must be >= 0");
  check(s.sweep.variable == "eta_ch" || s.sweep.variable == "xi" || s.sweep.variable == "N",
        "sweep.variable", fmt::format("'{}' must be eta_ch, xi or N", s.sweep.variable));
  check(s.sweep.points > 0, "sweep.points", "empty range");
  check(s.sweep.to >= s.sweep.from, "sweep.to", "empty range (to < from)");
  check(s.sweep.points == 1 || s.sweep.to > s.sweep.from, "sweep.to",
        "a multi-point range needs to > from");
  check(s.attack.amplification >= 1.0, "attack.amplification", "must be >= 1");
  check(s.attack.slope_factor > 0.0 && s.attack.slope_factor <= 1.0, "attack.slope_factor",
        "must lie in (0,1]");
  check(s.attack.displacement >= 0.0, "attack.displacement", "must be >= 0");
  if (s.coupler != "50:50" && s.coupler != "10:90") {
    check(std::filesystem::exists(s.coupler), "system.coupler",
          fmt::format("curve file '{}' does not exist", s.coupler));
  }
  if (!s.attack.plan_path.empty()) {
    check(std::filesystem::exists(s.attack.plan_path), "attack.plan",
          fmt::format("plan file '{}' does not exist", s.attack.plan_path));
  }
}

}  // namespace cvqkd::cli

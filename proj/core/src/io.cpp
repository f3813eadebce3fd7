#include "cvqkd/io.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "cvqkd/errors.hpp"

namespace cvqkd::io {

namespace {

constexpr std::string_view kMagic = "# cvqkd ";

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_double(std::string_view text, std::string_view what) {
  const std::string s(trim(text));
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(fmt::format("{}: '{}' is not a number", what, s));
}

std::string ratio_key(std::string_view prefix, double ratio) {
  return fmt::format("{}.r{}", prefix, format_number(ratio));
}

std::string pulse_prefix(int set, bool lo) { return fmt::format("set{}.{}", set, lo ? "lo" : "signal"); }

}  // namespace

std::string format_number(double value) { return fmt::format("{}", value); }

std::string ArtifactHeader::to_line() const {
  return fmt::format("{}{} v{} scenario={} seed={}", kMagic, kind, version, scenario_hash, seed);
}

ArtifactHeader ArtifactHeader::parse(std::string_view line) {
  line = trim(line);
  if (!line.starts_with(kMagic)) throw ConfigError(fmt::format("missing artifact header: '{}'", line));
  std::istringstream in{std::string(line.substr(kMagic.size()))};
  ArtifactHeader h;
  std::string version;
  in >> h.kind >> version;
  if (h.kind.empty() || version.size() < 2 || version[0] != 'v') {
    throw ConfigError(fmt::format("malformed artifact header: '{}'", line));
  }
  h.version = std::stoi(version.substr(1));
  if (h.version != kFormatVersion) {
    throw ConfigError(fmt::format("unsupported artifact version {}", h.version));
  }
  std::string token;
  while (in >> token) {
    if (token.starts_with("scenario=")) {
      h.scenario_hash = token.substr(9);
    } else if (token.starts_with("seed=")) {
      h.seed = std::stoull(token.substr(5));
    }
  }
  return h;
}

void KvDocument::set(std::string key, std::string value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(std::move(key), std::move(value));
}

void KvDocument::set(std::string key, double value) { set(std::move(key), format_number(value)); }
void KvDocument::set(std::string key, std::uint64_t value) { set(std::move(key), std::to_string(value)); }
void KvDocument::set(std::string key, bool value) { set(std::move(key), std::string(value ? "true" : "false")); }

bool KvDocument::contains(std::string_view key) const noexcept {
  for (const auto& [k, v] : entries_) {
    if (k == key) return true;
  }
  return false;
}

const std::string& KvDocument::get(std::string_view key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  throw ConfigError(fmt::format("missing key '{}' in {} document", key, header_.kind));
}

double KvDocument::get_double(std::string_view key) const { return parse_double(get(key), key); }

bool KvDocument::get_bool(std::string_view key) const {
  const auto& v = get(key);
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, v));
}

std::string KvDocument::to_string() const {
  std::string out = header_.to_line() + "\n";
  for (const auto& [k, v] : entries_) out += fmt::format("{} = {}\n", k, v);
  return out;
}

KvDocument KvDocument::parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty key-value document");
  KvDocument doc(ArtifactHeader::parse(line));
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(fmt::format("line {}: expected 'key = value'", line_no));
    }
    doc.set(std::string(trim(body.substr(0, eq))), std::string(trim(body.substr(eq + 1))));
  }
  return doc;
}

KvDocument to_kv(const protocol::EstimatorReport& report, ArtifactHeader header) {
  header.kind = "report";
  KvDocument doc(std::move(header));
  doc.set("ratio_low", report.ratio_low);
  doc.set("ratio_high", report.ratio_high);
  doc.set("shot_noise_est", report.shot_noise_est);
  doc.set("excess_noise_est", report.excess_noise_est);
  doc.set("covariance_xy", report.covariance_xy);
  for (const auto& [ratio, v] : report.variance_per_ratio) {
    doc.set(ratio_key("variance", ratio), v.sample_variance);
    doc.set(ratio_key("count", ratio), v.count);
  }
  return doc;
}

KvDocument to_kv(const attack::AttackPlan& plan, ArtifactHeader header) {
  header.kind = "plan";
  KvDocument doc(std::move(header));
  doc.set("strategy", std::string(attack::to_string(plan.kind())));
  if (const auto* a = std::get_if<attack::StrategyA>(&plan.strategy)) {
    doc.set("amplification", a->amplification);
  } else {
    const auto& b = std::get<attack::StrategyB>(plan.strategy);
    doc.set("slope_factor", b.slope_factor);
    doc.set("fake_channel", b.fake_channel);
  }
  doc.set("displacement", plan.wavelength.displacement);
  doc.set("lo_compensation", plan.lo_compensation);
  for (int set : {1, 2}) {
    const auto& pair = plan.wavelength.set(set);
    for (bool lo : {false, true}) {
      const auto& pulse = lo ? pair.lo : pair.signal;
      doc.set(pulse_prefix(set, lo) + ".wavelength_nm", pulse.wavelength_nm);
      doc.set(pulse_prefix(set, lo) + ".intensity", pulse.intensity);
    }
  }
  return doc;
}

attack::AttackPlan plan_from_kv(const KvDocument& doc) {
  attack::AttackPlan plan;
  const auto& strategy = doc.get("strategy");
  if (strategy == "A") {
    plan.strategy = attack::StrategyA{doc.get_double("amplification")};
  } else if (strategy == "B") {
    plan.strategy = attack::StrategyB{doc.get_double("slope_factor"), doc.get_double("fake_channel")};
  } else {
    throw ConfigError(fmt::format("unknown strategy '{}'", strategy));
  }
  plan.wavelength.displacement = doc.get_double("displacement");
  plan.lo_compensation = doc.get_bool("lo_compensation");
  for (int set : {1, 2}) {
    auto& pair = set == 1 ? plan.wavelength.set1 : plan.wavelength.set2;
    for (bool lo : {false, true}) {
      auto& pulse = lo ? pair.lo : pair.signal;
      pulse.wavelength_nm = doc.get_double(pulse_prefix(set, lo) + ".wavelength_nm");
      pulse.intensity = doc.get_double(pulse_prefix(set, lo) + ".intensity");
      pulse.path = lo ? physics::PulsePath::LocalOscillator : physics::PulsePath::Signal;
    }
  }
  return plan;
}

KvDocument to_kv(const analysis::NoisePolynomial& poly, ArtifactHeader header) {
  header.kind = "polynomial";
  KvDocument doc(std::move(header));
  doc.set("a", poly.a);
  doc.set("b", poly.b);
  doc.set("c", poly.c);
  doc.set("a_over_c", poly.a_over_c());
  doc.set("residual", poly.residual);
  for (const auto& [ratio, n] : poly.sample_sizes) doc.set(ratio_key("count", ratio), n);
  return doc;
}

KvDocument to_kv(const analysis::DetectionVerdict& verdict, ArtifactHeader header) {
  header.kind = "verdict";
  KvDocument doc(std::move(header));
  doc.set("ratio_a_over_c", verdict.ratio_a_over_c);
  doc.set("threshold", verdict.threshold);
  doc.set("attacked", verdict.attacked);
  doc.set("lo_intensity_anomaly", verdict.lo_intensity_anomaly);
  doc.set("wavelength_band_violation", verdict.wavelength_band_violation);
  return doc;
}

void write_records_csv(std::ostream& out, std::span<const protocol::PulseRecord> records,
                       const ArtifactHeader& header) {
  ArtifactHeader h = header;
  h.kind = "records";
  out << h.to_line() << '\n' << "slot,quad,ratio,alice_x,bob_y\n";
  fmt::memory_buffer buf;
  for (const auto& r : records) {
    buf.clear();
    fmt::format_to(std::back_inserter(buf), "{},{},{},{},{}\n", r.slot_index,
                   protocol::quadrature_code(r.quadrature), r.ratio_applied, r.alice_quadrature,
                   r.bob_outcome);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
}

std::vector<protocol::PulseRecord> read_records_csv(std::istream& in, ArtifactHeader* header) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("records file is empty");
  const auto h = ArtifactHeader::parse(line);
  if (h.kind != "records") throw ConfigError(fmt::format("expected a records file, got '{}'", h.kind));
  if (header) *header = h;
  if (!std::getline(in, line) || trim(line) != "slot,quad,ratio,alice_x,bob_y") {
    throw ConfigError("records file: missing column header 'slot,quad,ratio,alice_x,bob_y'");
  }
  std::vector<protocol::PulseRecord> records;
  int line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty()) continue;
    std::vector<std::string_view> cols;
    std::size_t start = 0;
    while (true) {
      const auto comma = body.find(',', start);
      cols.push_back(body.substr(start, comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (cols.size() != 5 || (cols[1] != "X" && cols[1] != "P")) {
      throw ConfigError(fmt::format("records line {}: malformed row '{}'", line_no, body));
    }
    protocol::PulseRecord r;
    const auto slot_text = cols[0];
    if (std::from_chars(slot_text.data(), slot_text.data() + slot_text.size(), r.slot_index).ec !=
        std::errc{}) {
      throw ConfigError(fmt::format("records line {}: bad slot '{}'", line_no, slot_text));
    }
    r.quadrature = cols[1] == "X" ? protocol::Quadrature::X : protocol::Quadrature::P;
    r.ratio_applied = parse_double(cols[2], "ratio");
    r.alice_quadrature = parse_double(cols[3], "alice_x");
    r.bob_outcome = parse_double(cols[4], "bob_y");
    records.push_back(r);
  }
  return records;
}

std::string content_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace cvqkd::io

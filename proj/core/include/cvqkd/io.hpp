#pragma once

// Versioned text artifacts: "key = value" documents and record CSV streams.
// Every artifact starts with
//   # cvqkd <kind> v<version> scenario=<hash> seed=<seed>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cvqkd/analysis.hpp"
#include "cvqkd/attack.hpp"
#include "cvqkd/protocol.hpp"

namespace cvqkd::io {

inline constexpr int kFormatVersion = 1;

struct ArtifactHeader {
  std::string kind;
  int version = kFormatVersion;
  std::string scenario_hash = "none";
  std::uint64_t seed = 0;

  std::string to_line() const;
  /// Throws ConfigError on a malformed or unsupported header.
  static ArtifactHeader parse(std::string_view line);
};

/// Shortest round-trip decimal representation.
std::string format_number(double value);

class KvDocument {
 public:
  KvDocument() = default;
  explicit KvDocument(ArtifactHeader header) : header_(std::move(header)) {}

  const ArtifactHeader& header() const noexcept { return header_; }
  ArtifactHeader& header() noexcept { return header_; }

  void set(std::string key, std::string value);
  void set(std::string key, double value);
  void set(std::string key, std::uint64_t value);
  void set(std::string key, bool value);

  bool contains(std::string_view key) const noexcept;
  /// Throw ConfigError when the key is missing or malformed.
  const std::string& get(std::string_view key) const;
  double get_double(std::string_view key) const;
  bool get_bool(std::string_view key) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }

  std::string to_string() const;
  static KvDocument parse(std::string_view text);

 private:
  ArtifactHeader header_;
  std::vector<std::pair<std::string, std::string>> entries_;
};

KvDocument to_kv(const protocol::EstimatorReport& report, ArtifactHeader header);
KvDocument to_kv(const attack::AttackPlan& plan, ArtifactHeader header);
KvDocument to_kv(const analysis::NoisePolynomial& poly, ArtifactHeader header);
KvDocument to_kv(const analysis::DetectionVerdict& verdict, ArtifactHeader header);

/// Inverse of to_kv(AttackPlan); does not validate against a system.
attack::AttackPlan plan_from_kv(const KvDocument& doc);

/// Columns slot,quad,ratio,alice_x,bob_y.
void write_records_csv(std::ostream& out, std::span<const protocol::PulseRecord> records,
                       const ArtifactHeader& header);
std::vector<protocol::PulseRecord> read_records_csv(std::istream& in, ArtifactHeader* header = nullptr);

/// FNV-1a 64-bit digest as 16 hex digits.
std::string content_hash(std::string_view text);

}  // namespace cvqkd::io

#pragma once

#include <stdexcept>
#include <string>

namespace cvqkd {

/// Wavelength (or other lookup key) outside the tabulated band.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Inconsistent or invalid configuration (schedules, curves, scenario files).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Not enough data to form an estimate.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Attack plan whose members violate a cross-member constraint.
class PlanConsistencyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The attacker's constraint system has no admissible solution.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, std::string constraint, double boundary)
      : std::runtime_error(what), constraint_(std::move(constraint)), boundary_(boundary) {}

  const std::string& constraint() const noexcept { return constraint_; }
  /// Largest channel transmittance for which the system is still solvable
  /// (NaN when no boundary exists in (0, 1]).
  double boundary() const noexcept { return boundary_; }

 private:
  std::string constraint_;
  double boundary_;
};

}  // namespace cvqkd

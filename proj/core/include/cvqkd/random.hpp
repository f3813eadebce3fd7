#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace cvqkd {

/// SplitMix64 stream keyed by (master seed, slot index).
///
/// Every protocol slot owns an independent engine, so a session's outcome is
/// a pure function of the master seed regardless of how slots are scheduled
/// across threads.
class CounterEngine {
 public:
  using result_type = std::uint64_t;

  CounterEngine(std::uint64_t master_seed, std::uint64_t stream) noexcept
      : state_(mix(mix(master_seed) ^ (stream * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL))) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

 private:
  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

/// Per-slot random source handed to every stochastic operation.
class Rng {
 public:
  explicit Rng(std::uint64_t master_seed, std::uint64_t stream = 0) noexcept
      : engine_(master_seed, stream) {}

  /// Uniform in [0, 1).
  double uniform() noexcept {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Standard normal variate.
  double standard_normal() { return unit_(engine_); }

  /// Normal variate with the given mean and variance (variance may be zero).
  double normal(double mean, double variance) {
    if (variance <= 0.0) return mean;
    return mean + std::sqrt(variance) * unit_(engine_);
  }

  bool coin() noexcept { return (engine_() >> 63) != 0; }

 private:
  CounterEngine engine_;
  std::normal_distribution<double> unit_{0.0, 1.0};
};

}  // namespace cvqkd

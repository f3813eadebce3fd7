#include "cvqkd/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "cvqkd/errors.hpp"

namespace cvqkd::protocol {

char quadrature_code(Quadrature q) noexcept { return q == Quadrature::X ? 'X' : 'P'; }

AttenuationSchedule::AttenuationSchedule(std::vector<Entry> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw ConfigError("attenuation schedule is empty");
  double total = 0.0;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (!(e.ratio >= 0.0 && e.ratio <= 1.0)) {
      throw ConfigError(fmt::format("attenuation ratio {} outside [0,1]", e.ratio));
    }
    if (!(e.probability >= 0.0 && e.probability <= 1.0)) {
      throw ConfigError(fmt::format("probability {} for ratio {} outside [0,1]", e.probability, e.ratio));
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (entries_[j].ratio == e.ratio) {
        throw ConfigError(fmt::format("attenuation ratio {} listed twice", e.ratio));
      }
    }
    total += e.probability;
    cumulative_.push_back(total);
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ConfigError(fmt::format("schedule probabilities sum to {:.15g}, expected 1", total));
  }
}

AttenuationSchedule AttenuationSchedule::two_point(double r1, double r2) {
  return AttenuationSchedule({{r1, 0.5}, {r2, 0.5}});
}

AttenuationSchedule AttenuationSchedule::three_ratio() {
  return AttenuationSchedule({{1.0, 0.9}, {0.5, 0.05}, {0.001, 0.05}});
}

bool AttenuationSchedule::contains(double ratio) const noexcept {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.ratio == ratio; });
}

std::size_t AttenuationSchedule::index_of(double ratio) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].ratio == ratio) return i;
  }
  throw ConfigError(fmt::format("attenuation ratio {} is not in the active schedule", ratio));
}

double AttenuationSchedule::min_ratio() const noexcept {
  return std::min_element(entries_.begin(), entries_.end(),
                          [](const Entry& a, const Entry& b) { return a.ratio < b.ratio; })
      ->ratio;
}

double AttenuationSchedule::max_ratio() const noexcept {
  return std::max_element(entries_.begin(), entries_.end(),
                          [](const Entry& a, const Entry& b) { return a.ratio < b.ratio; })
      ->ratio;
}

std::size_t AttenuationSchedule::sample_index(double u) const noexcept {
  for (std::size_t i = 0; i < cumulative_.size(); ++i) {
    if (u < cumulative_[i] && entries_[i].probability > 0.0) return i;
  }
  // Rounding left u above the final cumulative value.
  for (std::size_t i = entries_.size(); i-- > 0;) {
    if (entries_[i].probability > 0.0) return i;
  }
  return entries_.size() - 1;
}

void SystemParams::validate() const {
  detector.validate();
  if (!(modulation_variance >= 0.0)) {
    throw ConfigError(fmt::format("modulation variance {} must be >= 0", modulation_variance));
  }
  if (!(channel_transmittance > 0.0 && channel_transmittance <= 1.0)) {
    throw ConfigError(fmt::format("channel transmittance {} outside (0,1]", channel_transmittance));
  }
  if (!(excess_noise >= 0.0)) {
    throw ConfigError(fmt::format("excess noise {} must be >= 0", excess_noise));
  }
  if (!(lo_intensity > 0.0)) {
    throw ConfigError(fmt::format("LO intensity {} must be > 0", lo_intensity));
  }
}

double alice_modulate(Rng& rng, const SystemParams& params) {
  return rng.normal(0.0, params.modulation_variance * params.shot_noise_unit());
}

PulseRecord honest_measure(Rng& rng, const SystemParams& params, double alice_x, double ratio,
                           Quadrature quadrature, std::uint64_t slot) {
  if (!params.schedule.contains(ratio)) {
    throw ConfigError(fmt::format("attenuation ratio {} is not in the active schedule", ratio));
  }
  const double n0 = params.shot_noise_unit();
  const double gain = std::sqrt(ratio * params.channel_transmittance);
  const auto m = physics::balanced_homodyne_stats(
      params.detector, params.lo_intensity, gain * alice_x / std::sqrt(n0),
      ratio * params.channel_transmittance * params.excess_noise);
  const double y = rng.normal(m.mean, m.variance) + rng.normal(0.0, params.v_el());

  PulseRecord rec;
  rec.slot_index = slot;
  rec.quadrature = quadrature;
  rec.ratio_applied = ratio;
  rec.alice_quadrature = alice_x;
  rec.bob_outcome = y;
  rec.lo_intensity = params.lo_intensity;
  return rec;
}

PulseRecord honest_slot(const SystemParams& params, std::uint64_t master_seed, std::uint64_t slot) {
  Rng rng(master_seed, slot);
  const Quadrature quad = rng.coin() ? Quadrature::P : Quadrature::X;
  const double ratio = params.schedule.entries()[params.schedule.sample_index(rng.uniform())].ratio;
  const double x = alice_modulate(rng, params);
  const double p = alice_modulate(rng, params);
  return honest_measure(rng, params, quad == Quadrature::X ? x : p, ratio, quad, slot);
}

void RatioMoments::add(double x, double y) noexcept {
  ++count;
  const double n = static_cast<double>(count);
  const double dx = x - mean_x;
  const double dy = y - mean_y;
  mean_x += dx / n;
  mean_y += dy / n;
  m2_x += dx * (x - mean_x);
  m2_y += dy * (y - mean_y);
  c_xy += dx * (y - mean_y);
}

void RatioMoments::merge(const RatioMoments& other) noexcept {
  if (other.count == 0) return;
  if (count == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(count);
  const double nb = static_cast<double>(other.count);
  const double n = na + nb;
  const double dx = other.mean_x - mean_x;
  const double dy = other.mean_y - mean_y;
  mean_x += dx * nb / n;
  mean_y += dy * nb / n;
  m2_x += other.m2_x + dx * dx * na * nb / n;
  m2_y += other.m2_y + dy * dy * na * nb / n;
  c_xy += other.c_xy + dx * dy * na * nb / n;
  count += other.count;
}

void RunningMoments::add(double v) noexcept {
  ++count;
  const double d = v - mean;
  mean += d / static_cast<double>(count);
  m2 += d * (v - mean);
}

void RunningMoments::merge(const RunningMoments& other) noexcept {
  if (other.count == 0) return;
  if (count == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(count);
  const double nb = static_cast<double>(other.count);
  const double d = other.mean - mean;
  mean += d * nb / (na + nb);
  m2 += other.m2 + d * d * na * nb / (na + nb);
  count += other.count;
}

void SessionStatistics::add(const PulseRecord& record) {
  per_ratio[record.ratio_applied].add(record.alice_quadrature, record.bob_outcome);
  lo_intensity.add(record.lo_intensity);
  if (!std::isnan(record.eve_quadrature)) eve_noise.add(record.eve_quadrature - record.alice_quadrature);
}

void SessionStatistics::merge(const SessionStatistics& other) {
  for (const auto& [ratio, m] : other.per_ratio) per_ratio[ratio].merge(m);
  lo_intensity.merge(other.lo_intensity);
  eve_noise.merge(other.eve_noise);
}

SessionStatistics SessionStatistics::from_records(std::span<const PulseRecord> records,
                                                  std::optional<Quadrature> only) {
  SessionStatistics stats;
  for (const auto& r : records) {
    if (only && r.quadrature != *only) continue;
    stats.add(r);
  }
  return stats;
}

TwoPointEstimate two_point_from_variances(double v_low, double v_high, double r_low, double r_high,
                                          const SystemParams& known) {
  if (r_high == r_low) {
    throw ConfigError(fmt::format("degenerate schedule: r1 == r2 == {}", r_low));
  }
  const double gain = known.eta() * known.channel_transmittance;
  TwoPointEstimate est;
  est.shot_noise = (r_high * v_low - r_low * v_high) / (r_high - r_low) - known.v_el();
  est.excess_noise =
      ((v_high - v_low) / ((r_high - r_low) * gain) - known.modulation_variance * est.shot_noise) /
      est.shot_noise;
  return est;
}

double excess_noise_known_shot_noise(double variance, double ratio, const SystemParams& known) {
  const double n0 = known.shot_noise_unit();
  const double gain = ratio * known.eta() * known.channel_transmittance;
  return (variance - gain * known.modulation_variance * n0 - n0 - known.v_el()) / (gain * n0);
}

EstimatorReport estimate_two_point(const SessionStatistics& stats, const SystemParams& known) {
  if (stats.per_ratio.size() < 2) {
    throw EstimationError(fmt::format("two-point estimation needs 2 distinct ratios, got {}",
                                      stats.per_ratio.size()));
  }
  EstimatorReport report;
  for (const auto& [ratio, m] : stats.per_ratio) {
    report.variance_per_ratio[ratio] = {m.variance_y(), m.count};
  }
  const auto& low = *stats.per_ratio.begin();
  const auto& high = *stats.per_ratio.rbegin();
  for (const auto* e : {&low, &high}) {
    if (e->second.count < 2) {
      throw EstimationError(fmt::format("ratio {} has {} record(s); need at least 2", e->first,
                                        e->second.count));
    }
  }
  report.ratio_low = low.first;
  report.ratio_high = high.first;
  const auto est = two_point_from_variances(low.second.variance_y(), high.second.variance_y(),
                                            low.first, high.first, known);
  report.shot_noise_est = est.shot_noise;
  report.excess_noise_est = est.excess_noise;
  report.covariance_xy = high.second.covariance_xy();
  return report;
}

EstimatorReport estimate_two_point(std::span<const PulseRecord> records, const SystemParams& known,
                                   std::optional<Quadrature> only) {
  return estimate_two_point(SessionStatistics::from_records(records, only), known);
}

double estimate_covariance_transmittance(const SessionStatistics& stats, const SystemParams& known) {
  const auto it = stats.per_ratio.find(1.0);
  if (it == stats.per_ratio.end() || it->second.count < 2) {
    throw EstimationError("transmittance estimation needs at least 2 records at ratio 1");
  }
  const double signal = known.modulation_variance * known.shot_noise_unit();
  if (!(signal > 0.0)) throw EstimationError("zero modulation variance carries no signal");
  const double slope = it->second.covariance_xy() / signal;
  return slope * slope / known.eta();
}

double estimate_covariance_transmittance(std::span<const PulseRecord> records,
                                         const SystemParams& known) {
  return estimate_covariance_transmittance(SessionStatistics::from_records(records), known);
}

}  // namespace cvqkd::protocol

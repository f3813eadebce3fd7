#include <benchmark/benchmark.h>

#include <vector>

#include "cvqkd/analysis.hpp"
#include "cvqkd/attack.hpp"
#include "cvqkd/physics.hpp"
#include "cvqkd/session.hpp"

using namespace cvqkd;

namespace {

const physics::BeamSplitterCurve& curve() { return physics::BeamSplitterCurve::coupler_50_50(); }

void BM_TransmittanceLookup(benchmark::State& state) {
  double nm = 1270;
  for (auto _ : state) {
    benchmark::DoNotOptimize(physics::transmittance_at(curve(), nm));
    nm = nm >= 1600 ? 1270 : nm + 7;
  }
}
BENCHMARK(BM_TransmittanceLookup);

void BM_HonestSlots(benchmark::State& state) {
  protocol::SystemParams p;
  p.schedule = protocol::AttenuationSchedule::three_ratio();
  const auto slots = static_cast<std::uint64_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(protocol::honest_statistics(p, slots, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_HonestSlots)->Arg(1 << 18)->Unit(benchmark::kMillisecond);

void BM_AttackedSlots(benchmark::State& state) {
  protocol::SystemParams p;
  p.schedule = protocol::AttenuationSchedule::three_ratio();
  const auto plan = attack::solve_attack_parameters(attack::StrategyKind::A, p, curve());
  const auto slots = static_cast<std::uint64_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(attack::attacked_statistics(p, plan, curve(), slots, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_AttackedSlots)->Arg(1 << 18)->Unit(benchmark::kMillisecond);

void BM_Solver(benchmark::State& state) {
  protocol::SystemParams p;
  const auto kind = state.range(0) == 0 ? attack::StrategyKind::A : attack::StrategyKind::B;
  p.channel_transmittance = state.range(0) == 0 ? 0.9 : 0.5;
  for (auto _ : state) benchmark::DoNotOptimize(attack::solve_attack_parameters(kind, p, curve()));
}
BENCHMARK(BM_Solver)->Arg(0)->Arg(1);

void BM_NoiseFit(benchmark::State& state) {
  std::vector<analysis::VariancePoint> pts;
  for (double r : {1.0, 0.5, 0.001}) pts.push_back({r, 2 * r * r + 3 * r + 4, 1.0});
  for (auto _ : state) benchmark::DoNotOptimize(analysis::fit_noise_polynomial(pts));
}
BENCHMARK(BM_NoiseFit);

}  // namespace

BENCHMARK_MAIN();

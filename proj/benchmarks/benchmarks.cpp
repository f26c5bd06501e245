#include <benchmark/benchmark.h>

#include "treestat/analytic.hpp"
#include "treestat/estimate.hpp"
#include "treestat/oracle.hpp"
#include "treestat/simulate.hpp"
#include "treestat/timetags.hpp"

namespace {

using namespace treestat;

mc::SimulationConfig typical_config(std::uint64_t pulses) {
  mc::SimulationConfig config;
  config.ensemble = {3, 0.5, {}};
  config.noise = {0.01};
  config.tree = DetectorTree::balanced(4, 0.6);
  config.n_pulses = pulses;
  config.seed = 1;
  config.threads = 1;
  return config;
}

void BM_SimulatePulse(benchmark::State& state) {
  const auto pulses = static_cast<std::uint64_t>(state.range(0));
  const mc::SimulationConfig config = typical_config(pulses);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mc::simulate(config));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(pulses));
}
// The simulator hands work to a thread pool, so measure wall time.
BENCHMARK(BM_SimulatePulse)->Arg(1000)->Arg(10000)->Arg(100000)->UseRealTime();

void BM_EnumerateOutcomes(benchmark::State& state) {
  const int photons = static_cast<int>(state.range(0));
  const DetectorTree tree = DetectorTree::balanced(4, 0.6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(oracle::enumerate_outcomes(photons, tree));
  }
}
BENCHMARK(BM_EnumerateOutcomes)->DenseRange(4, 12, 2);

void BM_ClosedTheta(benchmark::State& state) {
  const EmitterEnsemble ensemble{static_cast<std::size_t>(state.range(0)), 0.5, {}};
  const NoiseModel noise{0.05};
  const DetectorTree tree = DetectorTree::balanced(4, 0.6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(analytic::theta_order(ensemble, noise, tree, 4));
  }
}
BENCHMARK(BM_ClosedTheta)->Arg(1)->Arg(8)->Arg(64);

void BM_ParseIngest(benchmark::State& state) {
  mc::SimulationConfig config = typical_config(static_cast<std::uint64_t>(state.range(0)));
  config.emit_stream = true;
  const mc::StreamResult result = mc::simulate_stream(config);
  const std::string text = timetags::format_stream(result.stream, timetags::StreamFormat::text);
  for (auto _ : state) {
    const timetags::TimeTagStream stream = timetags::parse_stream(text);
    benchmark::DoNotOptimize(
        timetags::ingest(stream, timetags::WindowingPolicy::from_header(stream.header)));
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_ParseIngest)->Arg(10000)->Arg(100000);

void BM_AnalyzeCounts(benchmark::State& state) {
  const CountSummary counts = mc::simulate(typical_config(100000));
  estimator::Options options;
  options.method = state.range(0) == 0 ? estimator::UncertaintyMethod::propagation
                                       : estimator::UncertaintyMethod::bootstrap;
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimator::analyze(counts, options));
  }
}
BENCHMARK(BM_AnalyzeCounts)->Arg(0)->Arg(1);

}  // namespace

BENCHMARK_MAIN();

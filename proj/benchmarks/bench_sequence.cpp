#include <benchmark/benchmark.h>

#include "sbf/rng.hpp"
#include "sbf/sequence.hpp"

using namespace sbf;

static void BM_FastRatesDerive(benchmark::State& state) {
  const SimulationParams p;
  for (auto _ : state) benchmark::DoNotOptimize(CycleSimulator(p));
}
BENCHMARK(BM_FastRatesDerive)->Unit(benchmark::kMillisecond);

static void BM_Cycle(benchmark::State& state) {
  SimulationParams p;
  p.fidelity = state.range(0) ? Fidelity::kObe : Fidelity::kFast;
  CycleSimulator sim(p);
  Rng rng = make_stream(1, 0);
  sim.reset(rng);
  CycleOutcome out;
  for (auto _ : state) {
    sim.run_cycle(rng, out);
    sim.detect_cycle(rng, out);
  }
  state.SetLabel(to_string(p.fidelity));
}
BENCHMARK(BM_Cycle)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

static void BM_Batch(benchmark::State& state) {
  const SimulationParams p;
  BatchOptions opt;
  opt.cycles = state.range(0);
  for (auto _ : state) benchmark::DoNotOptimize(run_batch(p, opt));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Batch)->Arg(100'000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include "sbf/collisions.hpp"
#include "sbf/rng.hpp"

using namespace sbf;

static void BM_SimulateTrace(benchmark::State& state) {
  TraceParams p;
  p.duration = state.range(0) * 3600.0;
  Rng rng = make_stream(1, 0);
  for (auto _ : state) benchmark::DoNotOptimize(simulate_trace(rng, p));
}
BENCHMARK(BM_SimulateTrace)->Arg(1)->Arg(43)->Unit(benchmark::kMillisecond);

static void BM_AnalyzeTrace(benchmark::State& state) {
  TraceParams p;
  Rng rng = make_stream(2, 0);
  const SimulatedTrace s = simulate_trace(rng, p);
  AnalysisOptions a;
  a.bootstrap = 199;
  for (auto _ : state) benchmark::DoNotOptimize(analyze_trace(s.trace, a));
}
BENCHMARK(BM_AnalyzeTrace)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

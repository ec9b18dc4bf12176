#include <benchmark/benchmark.h>

#include "sbf/chronogram.hpp"
#include "sbf/obe.hpp"

using namespace sbf;

static void BM_BuildLiouvillian(benchmark::State& state) {
  const IonSetup setup = IonSetup::nominal();
  for (auto _ : state) benchmark::DoNotOptimize(build_liouvillian(setup));
}
BENCHMARK(BM_BuildLiouvillian);

static void BM_Evolve(benchmark::State& state) {
  const Liouvillian L = build_liouvillian(IonSetup::nominal());
  EvolveOptions opt;
  opt.method = state.range(0) ? EvolveMethod::kRungeKutta : EvolveMethod::kMatrixExponential;
  for (auto _ : state) benchmark::DoNotOptimize(evolve(DensityMatrix(), L, 80e-6, opt));
  state.SetLabel(state.range(0) ? "rk45" : "expm");
}
BENCHMARK(BM_Evolve)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

static void BM_SteadyState(benchmark::State& state) {
  const Liouvillian L = build_liouvillian(IonSetup::nominal());
  for (auto _ : state) benchmark::DoNotOptimize(steady_state(L));
}
BENCHMARK(BM_SteadyState)->Unit(benchmark::kMillisecond);

static void BM_ExpectedCounts(benchmark::State& state) {
  const IonSetup setup = IonSetup::nominal();
  const Chronogram c = Chronogram::standard();
  for (auto _ : state) benchmark::DoNotOptimize(expected_counts(c, setup));
}
BENCHMARK(BM_ExpectedCounts)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

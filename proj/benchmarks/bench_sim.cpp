#include <benchmark/benchmark.h>

#include "epsdiag/envsim.hpp"

using namespace epsdiag;

static void BM_EnvProfile(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(sim::generate_env_profile(2001, 7));
  }
  state.SetItemsProcessed(state.iterations() * 2001);
}
BENCHMARK(BM_EnvProfile);

static void BM_Simulate(benchmark::State& state) {
  sim::ScenarioConfig cfg;
  cfg.sample_count = static_cast<int>(state.range(0));
  cfg.fault = faults::FaultClass::RegIgbtShort;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sim::simulate(cfg));
  }
  state.SetItemsProcessed(state.iterations() * cfg.sample_count);
}
BENCHMARK(BM_Simulate)->Arg(2001)->Unit(benchmark::kMillisecond);

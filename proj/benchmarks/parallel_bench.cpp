#include <benchmark/benchmark.h>

#include <filesystem>

#include "flowpilot/flow.hpp"

using namespace flowpilot;
namespace fs = std::filesystem;

namespace {

// Wall time of 16 simulated 20 ms jobs at parallelism P.
void BM_RunParallel(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  SimulatedBackend backend(PpaModel::shipped(), ParameterRegistry::shipped(), std::chrono::milliseconds(20));
  std::vector<FlowConfig> configs;
  for (int i = 0; i < 16; ++i) {
    FlowConfig c;
    c.design_name = "bench";
    c.parameters = ParameterRegistry::shipped().defaults();
    c.parameters["FP_CORE_UTIL"] = 30.0 + i;
    configs.push_back(std::move(c));
  }
  const auto root = fs::temp_directory_path() / ("fp-bench-" + std::to_string(p));
  int batch = 0;
  for (auto _ : state) {
    state.PauseTiming();
    fs::remove_all(root);
    const auto jobs = plan_jobs(configs, root, batch++ * 16);
    state.ResumeTiming();
    benchmark::DoNotOptimize(run_parallel(backend, jobs, p));
  }
  fs::remove_all(root);
  state.counters["high_water"] = backend.high_water_mark();
}
BENCHMARK(BM_RunParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

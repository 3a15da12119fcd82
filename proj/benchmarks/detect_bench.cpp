#include <benchmark/benchmark.h>

#include <random>

#include "flowpilot/issues.hpp"

using namespace flowpilot;

namespace {

void BM_Detect(benchmark::State& state) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> slack(-3000, 1000), util(30, 95);
  std::vector<RunMetrics> runs(256);
  for (auto& m : runs) {
    m.clock_period_ps = 10000;
    m.worst_setup_slack_ps = slack(rng);
    m.worst_hold_slack_ps = slack(rng) / 10;
    m.placement_utilization_pct = util(rng);
    m.drc_violation_count = static_cast<std::int64_t>(rng() % 3);
  }
  std::vector<FlowErrorRecord> errors;
  for (int i = 0; i < state.range(0); ++i) errors.push_back({Stage::routing, "GRT-0116", "overflow", ""});
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(detect(runs[i++ % runs.size()], errors));
}
BENCHMARK(BM_Detect)->Arg(0)->Arg(8)->Arg(64);

}  // namespace

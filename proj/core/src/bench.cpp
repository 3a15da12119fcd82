#include "flowpilot/bench.hpp"

#include <random>

#include "flowpilot/error.hpp"
#include "flowpilot/flow.hpp"

namespace fs = std::filesystem;

namespace flowpilot {

BenchResult bench_parallel(int jobs, std::chrono::milliseconds job_duration, int parallelism, fs::path scratch) {
  require(jobs >= 1, "bench needs at least one job");
  require(parallelism >= 1, "parallelism must be positive");
  require(job_duration.count() >= 0, "job duration must be non-negative");
  const bool own_scratch = scratch.empty();
  if (own_scratch) {
    std::random_device rd;
    scratch = fs::temp_directory_path() / ("flowpilot-bench-" + std::to_string(rd()));
  }
  fs::create_directories(scratch);

  const auto& registry = ParameterRegistry::shipped();
  std::vector<FlowConfig> configs;
  for (int i = 0; i < jobs; ++i) {
    FlowConfig c;
    c.design_name = "bench";
    c.parameters["FP_CORE_UTIL"] = 30.0 + (i % 41);
    configs.push_back(c);
  }
  SimulatedBackend backend(PpaModel::shipped(), registry, job_duration);

  auto timed = [&](int p, const std::string& sub, int& high_water) {
    backend.reset_counters();
    auto planned = plan_jobs(configs, scratch / sub);
    const auto t0 = std::chrono::steady_clock::now();
    auto done = run_parallel(backend, std::move(planned), p, registry);
    const auto t1 = std::chrono::steady_clock::now();
    for (const auto& j : done)
      if (j.status != JobStatus::succeeded) fail(ErrorCode::PreconditionViolation, "bench job " + j.job_id + " failed");
    high_water = backend.high_water_mark();
    return std::chrono::duration<double>(t1 - t0).count();
  };

  BenchResult r;
  r.jobs = jobs;
  r.job_duration = job_duration;
  r.parallelism = parallelism;
  r.serial_seconds = timed(1, "p1", r.serial_high_water);
  r.parallel_seconds = timed(parallelism, "p" + std::to_string(parallelism), r.parallel_high_water);
  r.speedup = r.parallel_seconds > 0 ? r.serial_seconds / r.parallel_seconds : 0;
  std::error_code ec;
  if (own_scratch) fs::remove_all(scratch, ec);
  else {
    fs::remove_all(scratch / "p1", ec);
    fs::remove_all(scratch / ("p" + std::to_string(parallelism)), ec);
  }
  return r;
}

nlohmann::json to_json(const BenchResult& r) {
  return {{"jobs", r.jobs},
          {"job_duration_ms", r.job_duration.count()},
          {"parallelism", r.parallelism},
          {"serial_seconds", r.serial_seconds},
          {"parallel_seconds", r.parallel_seconds},
          {"speedup", r.speedup},
          {"serial_high_water", r.serial_high_water},
          {"parallel_high_water", r.parallel_high_water}};
}

}  // namespace flowpilot

#pragma once

#include <chrono>
#include <filesystem>

#include <nlohmann/json.hpp>

namespace flowpilot {

struct BenchResult {
  int jobs = 0;
  std::chrono::milliseconds job_duration{0};
  int parallelism = 1;
  double serial_seconds = 0;
  double parallel_seconds = 0;
  double speedup = 0;
  int serial_high_water = 0;
  int parallel_high_water = 0;
};

/// Runs `jobs` simulated flow jobs of fixed duration once with P=1 and once
/// with P=`parallelism`, timing each batch. Run directories go under
/// `scratch` (a temporary directory when empty) and are removed afterwards.
BenchResult bench_parallel(int jobs, std::chrono::milliseconds job_duration, int parallelism,
                           std::filesystem::path scratch = {});

nlohmann::json to_json(const BenchResult& result);

}  // namespace flowpilot

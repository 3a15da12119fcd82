#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowpilot/flow_config.hpp"
#include "flowpilot/metrics.hpp"

namespace flowpilot {

enum class JobStatus { queued, running, succeeded, failed };

std::string_view to_string(JobStatus status);
JobStatus job_status_from_string(std::string_view text);
bool is_terminal(JobStatus status);

/// One flow execution: identity, configuration, lifecycle and outcome.
struct RunJob {
  std::string job_id;
  int ordinal = 0;
  FlowConfig config;
  JobStatus status = JobStatus::queued;
  std::string run_directory;
  std::optional<std::chrono::system_clock::time_point> started_at;
  std::optional<std::chrono::system_clock::time_point> finished_at;
  std::optional<RunMetrics> metrics;
  std::vector<FlowErrorRecord> errors;

  /// Enforces queued -> running -> {succeeded, failed}; throws PreconditionViolation otherwise.
  void transition(JobStatus next);
};

/// "0007-" followed by the first 8 hex digits of the config content hash.
std::string make_job_id(int ordinal, const FlowConfig& config);

nlohmann::json to_json(const RunJob& job);
RunJob run_job_from_json(const nlohmann::json& doc);

}  // namespace flowpilot

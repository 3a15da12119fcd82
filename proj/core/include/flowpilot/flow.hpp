#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stop_token>
#include <string>
#include <vector>

#include "flowpilot/flow_config.hpp"
#include "flowpilot/job.hpp"
#include "flowpilot/metrics.hpp"
#include "flowpilot/ppa_model.hpp"
#include "flowpilot/registry.hpp"

namespace flowpilot {

struct FlowRequest {
  FlowConfig config;
  std::filesystem::path run_directory;
  std::chrono::milliseconds timeout{0};
  std::stop_token stop;
};

struct FlowOutcome {
  int exit_code = 0;
  bool timed_out = false;
  bool cancelled = false;
  // Last stage seen in the backend's output; used to label synthetic errors.
  Stage last_stage = Stage::synthesis;
};

/// A physical-design flow. Implementations must tolerate concurrent calls
/// from several workers, each with its own run directory.
class FlowBackend {
 public:
  virtual ~FlowBackend() = default;
  virtual std::string name() const = 0;
  virtual std::chrono::milliseconds default_timeout() const = 0;
  /// Writes artifacts into request.run_directory (already created and empty).
  virtual FlowOutcome run(const FlowRequest& request) = 0;
};

using FlowBackendHandle = std::shared_ptr<FlowBackend>;

/// Deterministic in-process flow backed by PpaModel. Writes metrics.json and
/// logs/flow.log, optionally after sleeping `duration` (interruptible).
class SimulatedBackend : public FlowBackend {
 public:
  using FailureHook = std::function<std::optional<FlowErrorRecord>(const FlowConfig&)>;

  explicit SimulatedBackend(PpaModel model = PpaModel::shipped(),
                            const ParameterRegistry& registry = ParameterRegistry::shipped(),
                            std::chrono::milliseconds duration = std::chrono::milliseconds(0));

  std::string name() const override { return "simulated"; }
  std::chrono::milliseconds default_timeout() const override { return std::chrono::seconds(60); }
  FlowOutcome run(const FlowRequest& request) override;

  /// Returning a record makes the run fail at that record's stage.
  void set_failure_hook(FailureHook hook) { failure_hook_ = std::move(hook); }
  void set_duration(std::chrono::milliseconds d) { duration_ = d; }

  int high_water_mark() const { return high_water_.load(); }
  int invocations() const { return invocations_.load(); }
  void reset_counters();

 private:
  PpaModel model_;
  const ParameterRegistry* registry_;
  std::chrono::milliseconds duration_;
  FailureHook failure_hook_;
  std::atomic<int> running_{0};
  std::atomic<int> high_water_{0};
  std::atomic<int> invocations_{0};
};

/// External flow launched as a child process:
///   <command...> <run_directory>/config.json
/// with stdout/stderr captured to logs/flow.log and PDK_ROOT pinned when set.
class ProcessBackend : public FlowBackend {
 public:
  ProcessBackend(std::vector<std::string> command, const ParameterRegistry& registry = ParameterRegistry::shipped(),
                 std::string pdk_root = {});

  std::string name() const override { return "process"; }
  std::chrono::milliseconds default_timeout() const override { return std::chrono::hours(1); }
  FlowOutcome run(const FlowRequest& request) override;

 private:
  std::vector<std::string> command_;
  const ParameterRegistry* registry_;
  std::string pdk_root_;
};

struct ExecuteOptions {
  std::optional<std::chrono::milliseconds> timeout;  // backend default when unset
  std::stop_token stop;
};

struct ExecuteResult {
  bool succeeded = false;
  std::optional<RunMetrics> metrics;
  std::vector<FlowErrorRecord> errors;
  double wall_seconds = 0;
};

/// Runs one flow. Flow-level failures (nonzero exit, timeout, error lines)
/// come back as succeeded = false with FlowErrorRecords.
/// Throws UnknownParameter/ParameterOutOfRange before launching, and
/// RunDirectoryConflict when run_directory exists and is not empty.
ExecuteResult execute(FlowBackend& backend, const FlowConfig& config, const std::filesystem::path& run_directory,
                      const ParameterRegistry& registry = ParameterRegistry::shipped(), const ExecuteOptions& options = {});

/// Assigns job ids (ordinal + hash prefix) and run directories
/// runs_root/<design>/<job_id>/, starting at `first_ordinal`.
std::vector<RunJob> plan_jobs(const std::vector<FlowConfig>& configs, const std::filesystem::path& runs_root,
                              int first_ordinal = 0);

struct ParallelOptions {
  std::optional<std::chrono::milliseconds> timeout;
  std::stop_token stop;
  // Called, serialized, on every status change.
  std::function<void(const RunJob&)> on_update;
};

/// Runs queued jobs with at most `parallelism` in flight. Result order
/// matches input order; every job ends succeeded or failed.
std::vector<RunJob> run_parallel(FlowBackend& backend, std::vector<RunJob> jobs, int parallelism,
                                 const ParameterRegistry& registry = ParameterRegistry::shipped(),
                                 const ParallelOptions& options = {});

}  // namespace flowpilot

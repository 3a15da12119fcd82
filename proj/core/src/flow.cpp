#include "flowpilot/flow.hpp"

#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "flowpilot/error.hpp"
#include "flowpilot/subprocess.hpp"
#include "text_util.hpp"

namespace fs = std::filesystem;

namespace flowpilot {

// --- SimulatedBackend ------------------------------------------------------------

SimulatedBackend::SimulatedBackend(PpaModel model, const ParameterRegistry& registry, std::chrono::milliseconds duration)
    : model_(std::move(model)), registry_(&registry), duration_(duration) {}

void SimulatedBackend::reset_counters() {
  high_water_ = 0;
  invocations_ = 0;
}

FlowOutcome SimulatedBackend::run(const FlowRequest& request) {
  ++invocations_;
  const int now = ++running_;
  int seen = high_water_.load();
  while (now > seen && !high_water_.compare_exchange_weak(seen, now)) {
  }
  struct Leave {
    std::atomic<int>& r;
    ~Leave() { --r; }
  } leave{running_};

  const auto start = std::chrono::steady_clock::now();
  const auto deadline = start + duration_;
  FlowOutcome outcome;
  fs::create_directories(request.run_directory / "logs");
  std::ofstream log(request.run_directory / "logs" / "flow.log");
  log << "[INFO] simulated flow for " << request.config.design_name << "\n";
  while (std::chrono::steady_clock::now() < deadline) {
    if (request.stop.stop_requested()) {
      outcome.cancelled = true;
      outcome.exit_code = 130;
      return outcome;
    }
    if (request.timeout.count() > 0 && std::chrono::steady_clock::now() - start > request.timeout) {
      outcome.timed_out = true;
      outcome.exit_code = 137;
      return outcome;
    }
    const auto left = deadline - std::chrono::steady_clock::now();
    std::this_thread::sleep_for(std::min<std::chrono::steady_clock::duration>(left, std::chrono::milliseconds(5)));
  }

  if (failure_hook_) {
    if (auto failure = failure_hook_(request.config)) {
      log << "[STAGE] " << to_string(failure->stage) << "\n";
      log.close();
      const auto stage_dir = request.run_directory / "logs" / std::string(to_string(failure->stage));
      fs::create_directories(stage_dir);
      std::ofstream(stage_dir / (std::string(to_string(failure->stage)) + ".log"))
          << "[ERROR] " << failure->code << ": " << failure->message << "\n";
      outcome.exit_code = 1;
      outcome.last_stage = failure->stage;
      return outcome;
    }
  }
  RunMetrics m = model_.evaluate(request.config, *registry_);
  m.run_wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_metrics_json(request.run_directory / "metrics.json", m);
  log << "[INFO] signoff complete\n";
  outcome.last_stage = Stage::signoff;
  return outcome;
}

// --- ProcessBackend ----------------------------------------------------------------

ProcessBackend::ProcessBackend(std::vector<std::string> command, const ParameterRegistry& registry, std::string pdk_root)
    : command_(std::move(command)), registry_(&registry), pdk_root_(std::move(pdk_root)) {
  require(!command_.empty(), "process backend needs a command");
}

namespace {

Stage last_stage_in(const fs::path& log_file) {
  std::ifstream in(log_file);
  std::string line;
  Stage last = Stage::synthesis;
  while (std::getline(in, line)) {
    for (const auto& token : text::tokenize(line)) {
      if (auto s = stage_from_string(token)) last = *s;
    }
  }
  return last;
}

}  // namespace

FlowOutcome ProcessBackend::run(const FlowRequest& request) {
  if (!find_executable(command_.front()))
    fail(ErrorCode::BackendNotFound, "flow entry point '" + command_.front() + "' not found");
  const auto config_file = request.run_directory / "config.json";
  std::ofstream(config_file) << to_flow_json(request.config, *registry_).dump(2) << "\n";
  fs::create_directories(request.run_directory / "logs");

  auto argv = command_;
  argv.push_back(config_file.string());
  ProcessOptions opts;
  opts.working_directory = request.run_directory;
  opts.log_file = request.run_directory / "logs" / "flow.log";
  if (!pdk_root_.empty()) opts.extra_env["PDK_ROOT"] = pdk_root_;
  opts.extra_env["FLOWPILOT_RUN_DIR"] = request.run_directory.string();
  if (request.timeout.count() > 0) opts.timeout = request.timeout;
  opts.stop = request.stop;
  const auto r = run_process(argv, opts);

  FlowOutcome outcome;
  outcome.exit_code = r.exit_code;
  outcome.timed_out = r.timed_out;
  outcome.cancelled = r.cancelled;
  outcome.last_stage = last_stage_in(*opts.log_file);
  return outcome;
}

// --- execute -----------------------------------------------------------------------

ExecuteResult execute(FlowBackend& backend, const FlowConfig& config, const fs::path& run_directory,
                      const ParameterRegistry& registry, const ExecuteOptions& options) {
  validate(config, registry);
  std::error_code ec;
  if (fs::exists(run_directory, ec) && !fs::is_empty(run_directory, ec))
    fail(ErrorCode::RunDirectoryConflict, run_directory.string() + " already exists and is not empty");
  fs::create_directories(run_directory);

  FlowRequest request{config, run_directory, options.timeout.value_or(backend.default_timeout()), options.stop};
  const auto start = std::chrono::steady_clock::now();
  const FlowOutcome outcome = backend.run(request);
  ExecuteResult result;
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  try {
    auto artifacts = parse_run_artifacts(run_directory);
    result.metrics = std::move(artifacts.metrics);
    result.errors = std::move(artifacts.errors);
  } catch (const MalformedReport& e) {
    result.errors.push_back({Stage::signoff, "MALFORMED_REPORT", e.what(), e.file().string()});
  } catch (const Error& e) {
    if (e.code() != ErrorCode::MissingReports) throw;
  }
  if (result.metrics) {
    const auto& m = *result.metrics;
    const bool any = m.area_um2 || m.critical_path_delay_ps || m.power_uw || m.worst_setup_slack_ps ||
                     m.worst_hold_slack_ps || m.placement_utilization_pct || m.drc_violation_count ||
                     m.lvs_error_count;
    // A run that only left logs behind has no metrics, just errors.
    if (!any) result.metrics.reset();
    else if (!m.run_wall_seconds) result.metrics->run_wall_seconds = result.wall_seconds;
  }

  const auto log_path = (run_directory / "logs" / "flow.log").string();
  if (outcome.timed_out) {
    result.errors.push_back({outcome.last_stage, "TIMEOUT",
                             "flow exceeded the wall-clock limit of " + std::to_string(request.timeout.count()) + " ms",
                             log_path});
  } else if (outcome.cancelled) {
    result.errors.push_back({outcome.last_stage, "ABORTED", "flow cancelled", log_path});
  } else if (outcome.exit_code != 0 && result.errors.empty()) {
    result.errors.push_back({outcome.last_stage, "EXIT-" + std::to_string(outcome.exit_code),
                             "flow exited with status " + std::to_string(outcome.exit_code), log_path});
  } else if (outcome.exit_code == 0 && !result.metrics && result.errors.empty()) {
    result.errors.push_back({outcome.last_stage, "NO_REPORTS", "flow finished without report files", log_path});
  }
  result.succeeded = outcome.exit_code == 0 && !outcome.timed_out && !outcome.cancelled && result.metrics &&
                     result.errors.empty();
  return result;
}

// --- scheduling --------------------------------------------------------------------

std::vector<RunJob> plan_jobs(const std::vector<FlowConfig>& configs, const fs::path& runs_root, int first_ordinal) {
  std::vector<RunJob> jobs;
  int ordinal = first_ordinal;
  for (const auto& c : configs) {
    RunJob j;
    j.ordinal = ordinal++;
    j.config = c;
    j.job_id = make_job_id(j.ordinal, c);
    j.run_directory = (runs_root / c.design_name / j.job_id).string();
    jobs.push_back(std::move(j));
  }
  return jobs;
}

std::vector<RunJob> run_parallel(FlowBackend& backend, std::vector<RunJob> jobs, int parallelism,
                                 const ParameterRegistry& registry, const ParallelOptions& options) {
  require(!jobs.empty(), "run_parallel needs at least one job");
  require(parallelism >= 1, "parallelism must be positive");
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    require(jobs[i].status == JobStatus::queued, "job " + jobs[i].job_id + " is not queued");
    for (std::size_t k = 0; k < i; ++k)
      require(jobs[k].run_directory != jobs[i].run_directory, "run directories must be unique per job");
  }

  std::mutex event_mutex;
  auto publish = [&](const RunJob& job) {
    if (!options.on_update) return;
    std::lock_guard lock(event_mutex);
    options.on_update(job);
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      RunJob& job = jobs[i];
      job.transition(JobStatus::running);
      job.started_at = std::chrono::system_clock::now();
      publish(job);
      if (options.stop.stop_requested()) {
        job.errors.push_back({Stage::synthesis, "ABORTED", "aborted before launch", ""});
        job.transition(JobStatus::failed);
      } else {
        try {
          ExecuteOptions eo{options.timeout, options.stop};
          auto r = execute(backend, job.config, job.run_directory, registry, eo);
          job.metrics = std::move(r.metrics);
          job.errors = std::move(r.errors);
          job.transition(r.succeeded ? JobStatus::succeeded : JobStatus::failed);
        } catch (const std::exception& e) {
          const auto* err = dynamic_cast<const Error*>(&e);
          job.errors.push_back({Stage::synthesis, err ? std::string(to_string(err->code())) : "INTERNAL", e.what(), ""});
          job.metrics.reset();
          job.transition(JobStatus::failed);
        }
      }
      job.finished_at = std::chrono::system_clock::now();
      publish(job);
    }
  };

  const auto n = std::min<std::size_t>(static_cast<std::size_t>(parallelism), jobs.size());
  {
    std::vector<std::jthread> pool;
    pool.reserve(n);
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  return jobs;
}

}  // namespace flowpilot

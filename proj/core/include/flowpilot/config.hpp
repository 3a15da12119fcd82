#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "flowpilot/goal.hpp"
#include "flowpilot/issues.hpp"
#include "flowpilot/llm.hpp"
#include "flowpilot/orchestrator.hpp"

namespace flowpilot {

/// Deployment settings read from an INI-style file:
///
///   [backends]   provider, mock_script, endpoint, model, api_key_env,
///                input_usd_per_mtok, output_usd_per_mtok,
///                flow, flow_command, pdk_root, sim_duration_ms,
///                lint, verilator
///   [thresholds] utilization_warning_pct, utilization_critical_pct, slack_critical_fraction
///   [retrieval]  depth, budget
///   [goal]       priority, weight_area, weight_delay, weight_power,
///                stop_after_runs, stop_after_stale_rounds
///   [run]        parallelism, max_fix_attempts, flow_timeout_s, state_dir, corpus_dir
///
/// Unknown sections or keys are rejected. Values are range-checked with the
/// same rules the library enforces at run time.
struct CliConfig {
  std::string provider = "mock";  // mock | http
  std::filesystem::path mock_script;
  HttpProviderOptions http;
  RateCard mock_rates = {3.0, 15.0};

  std::string flow = "simulated";  // simulated | process
  std::string flow_command;        // whitespace-separated argv for the process backend
  std::string pdk_root;
  int sim_duration_ms = 0;

  std::string lint = "stub";  // stub | verilator
  std::string verilator = "verilator";

  DetectionThresholds thresholds;
  int retrieval_depth = kDefaultRetrievalDepth;
  std::size_t prompt_budget = kDefaultPromptBudget;
  OptimizationGoal goal;

  int parallelism = 4;
  int max_fix_attempts = 3;
  std::optional<int> flow_timeout_s;
  std::filesystem::path state_dir = "state";
  std::filesystem::path corpus_dir;  // empty: shipped corpus

  /// Defaults overlaid by `file`. Throws Error{InvalidConfig} naming the key
  /// and the accepted range.
  static CliConfig load(const std::filesystem::path& file);
  static CliConfig parse(const std::string& text, const std::string& source = "<config>");

  /// Re-checks every field; `parse` calls this after reading.
  void validate() const;

  std::filesystem::path effective_corpus_dir() const;
};

/// Instantiates the configured backends. `answers` may be null.
BackendSet make_backends(const CliConfig& config, std::shared_ptr<AnswerSource> answers = nullptr);

PipelineOptions make_pipeline_options(const CliConfig& config);

}  // namespace flowpilot

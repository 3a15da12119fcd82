#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stop_token>
#include <string>

#include "flowpilot/agents.hpp"
#include "flowpilot/flow.hpp"
#include "flowpilot/issues.hpp"
#include "flowpilot/lint.hpp"
#include "flowpilot/llm.hpp"
#include "flowpilot/pipeline_state.hpp"
#include "flowpilot/rag.hpp"
#include "flowpilot/state_store.hpp"

namespace flowpilot {

struct BackendSet {
  ProviderHandle provider;
  FlowBackendHandle flow;
  std::shared_ptr<LintBackend> lint;
  std::shared_ptr<AnswerSource> answers;
  IndexHandle corpus;
  const ParameterRegistry* registry = &ParameterRegistry::shipped();
};

struct PipelineOptions {
  std::optional<std::string> design_id;  // derived from the prompt when unset
  int parallelism = 4;
  int max_fix_attempts = 3;
  AgentLimits limits;
  int retrieval_depth = kDefaultRetrievalDepth;
  std::size_t prompt_budget = kDefaultPromptBudget;
  DetectionThresholds thresholds;
  RetryPolicy retry;
  std::optional<std::chrono::milliseconds> flow_timeout;
  // Relative improvement a round needs to count as progress.
  double stale_threshold = 0.001;
  std::stop_token stop;
  std::function<void(const PipelineEvent&)> on_event;
  // Polled at each round start; a returned goal applies from that round on.
  std::function<std::optional<OptimizationGoal>()> goal_update;
  // Called after every snapshot. Returning true stops the driver on the spot,
  // leaving the store as a killed process would.
  std::function<bool(const PipelineState&)> interrupt_after_snapshot;
};

/// "design-" followed by 8 hex digits of the prompt's hash.
std::string default_design_id(const std::string& prompt);

/// The pipeline state machine for one design. Not thread-safe: one owner
/// drives a design; workers report through the event stream.
class Orchestrator {
 public:
  Orchestrator(BackendSet backends, StateStore& store, PipelineOptions options = {});

  /// prompt -> plan -> HDL -> verify -> baseline -> optimization rounds.
  /// Agent and backend errors end in phase aborted with the cause recorded.
  PipelineState run(const std::string& prompt, const OptimizationGoal& goal);

  /// Continues a stored design from its latest snapshot. `extra_runs` raises
  /// stop_after_runs and reopens a finished design for more rounds.
  PipelineState resume(const std::string& design_id, std::optional<int> extra_runs = std::nullopt);

  /// One detect -> query -> retrieve -> assemble -> propose -> run round.
  void optimize_round(PipelineState& state, const OptimizationGoal& goal, int k);

  Gateway& gateway() { return gateway_; }

 private:
  struct Interrupted {};

  void drive(PipelineState& state);
  void step_planning(PipelineState& state);
  void step_generating(PipelineState& state);
  void step_verifying(PipelineState& state);
  void step_baselining(PipelineState& state);
  void step_optimizing(PipelineState& state);

  void set_phase(PipelineState& state, Phase next);
  void emit(const PipelineState& state, const std::string& type, nlohmann::json data);
  void checkpoint(PipelineState& state);
  void abort(PipelineState& state, const std::string& code, const std::string& cause);
  std::vector<RunJob> launch(PipelineState& state, const std::vector<FlowConfig>& configs, int parallelism);
  PromptPayload payload_for(const PipelineState& state, const HistoryEntry& entry, const IssueSet& issues,
                            const OptimizationGoal* goal) const;
  std::optional<double> cost_of(const PipelineState& state, const RunJob& job, const OptimizationGoal& goal) const;
  void clear_orphan_runs(const PipelineState& state);

  BackendSet backends_;
  StateStore& store_;
  PipelineOptions options_;
  Gateway gateway_;
};

struct PromoteResult {
  std::map<std::string, int> credited;  // chunk id -> increment
  std::optional<std::string> new_chunk_id;
};

/// Credits retrieved chunks that led to improvements and stores the winning
/// configuration as a prior_config chunk. Requires phase done. No improving
/// run leaves the corpus untouched.
PromoteResult promote_successful_chunks(const PipelineState& state, const std::filesystem::path& corpus_dir,
                                        const ParameterRegistry& registry = ParameterRegistry::shipped());

}  // namespace flowpilot

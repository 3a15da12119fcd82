#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "flowpilot/agents.hpp"
#include "flowpilot/goal.hpp"
#include "flowpilot/history.hpp"
#include "flowpilot/llm.hpp"

namespace flowpilot {

inline constexpr int kStateSchemaVersion = 1;
inline constexpr int kEventSchemaVersion = 1;

enum class Phase { planning, generating, verifying, baselining, optimizing, done, aborted };

std::string_view to_string(Phase phase);
Phase phase_from_string(std::string_view text);
bool is_terminal(Phase phase);
/// Listed order, plus verifying -> generating, optimizing -> optimizing and any -> aborted.
bool phase_transition_allowed(Phase from, Phase to);

/// Everything the orchestrator knows about one design.
struct PipelineState {
  std::string design_id;
  std::string prompt;
  OptimizationGoal goal;
  Phase phase = Phase::planning;
  std::optional<DesignSpec> design;
  std::optional<HdlArtifact> hdl;
  std::optional<FlowConfig> incumbent_config;
  OptimizationHistory history;
  CostSummary cost_ledger;

  int round = 0;
  int stale_rounds = 0;
  int baseline_attempts = 0;
  // Fix waiting to be tried by the next baseline attempt.
  std::optional<FixProposal> pending_fix;
  std::string abort_code;
  std::string abort_cause;
  bool promoted = false;
  // Provider call counters at the time of the snapshot.
  std::map<std::string, int> llm_cursor;
  int snapshot_seq = 0;

  /// Moves to `next`; throws PreconditionViolation for an illegal transition.
  void transition(Phase next);
};

nlohmann::json to_json(const PipelineState& state);
PipelineState pipeline_state_from_json(const nlohmann::json& doc);

struct PipelineEvent {
  std::uint64_t seq = 0;
  std::string design_id;
  // phase, question, answer, job, round, goal, cost, error
  std::string type;
  nlohmann::json data;
  std::int64_t time_ms = 0;
};

nlohmann::json to_json(const PipelineEvent& event);
PipelineEvent pipeline_event_from_json(const nlohmann::json& doc);

/// Compact job document used in events and run listings.
nlohmann::json job_summary(const RunJob& job, const std::optional<double>& scalar_cost = std::nullopt);

}  // namespace flowpilot

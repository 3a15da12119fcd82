#pragma once

#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowpilot/flow_config.hpp"
#include "flowpilot/goal.hpp"
#include "flowpilot/issues.hpp"
#include "flowpilot/lint.hpp"
#include "flowpilot/llm.hpp"
#include "flowpilot/proposal.hpp"
#include "flowpilot/rag.hpp"

namespace flowpilot {

// --- structured output ---------------------------------------------------------

struct FencedBlock {
  std::string info;  // lower-cased info string, e.g. "json", "verilog", "changes"
  std::string body;
};

/// Extracts ``` fenced blocks. Tolerates a missing closing fence on the last
/// block, surrounding prose and info strings in any case.
std::vector<FencedBlock> fenced_blocks(std::string_view text);

/// First block whose info string equals one of `infos`.
std::optional<std::string> find_block(std::string_view text, std::initializer_list<std::string_view> infos);

// --- design spec and planning ---------------------------------------------------

struct Port {
  std::string name;
  int width_bits = 1;

  bool operator==(const Port&) const = default;
};

struct Clarification {
  std::string question;
  std::string answer;

  bool operator==(const Clarification&) const = default;
};

struct DesignSpec {
  std::string name;
  std::string functional_description;
  std::vector<Port> inputs;
  std::vector<Port> outputs;
  std::string architecture_notes;
  GoalPriority ppa_priority = GoalPriority::balanced;
  std::vector<Clarification> clarifications;

  bool operator==(const DesignSpec&) const = default;
};

/// Name is an identifier, at least one output, every width >= 1.
void validate(const DesignSpec& spec);
nlohmann::json to_json(const DesignSpec& spec);
DesignSpec design_spec_from_json(const nlohmann::json& doc);

/// Supplies answers to planner questions.
class AnswerSource {
 public:
  virtual ~AnswerSource() = default;
  /// Throws Error{AnswerSourceClosed} when no answer will come.
  virtual std::string answer(const std::string& question) = 0;
};

/// Answers from a fixed list, in order.
class ScriptedAnswers : public AnswerSource {
 public:
  explicit ScriptedAnswers(std::vector<std::string> answers);
  ScriptedAnswers(ScriptedAnswers&& other) noexcept
      : answers_(std::move(other.answers_)), next_(other.next_), asked_(std::move(other.asked_)) {}
  /// Reads a JSON array of strings.
  static ScriptedAnswers from_file(const std::filesystem::path& file);

  std::string answer(const std::string& question) override;
  std::vector<std::string> asked() const;

 private:
  std::vector<std::string> answers_;
  std::size_t next_ = 0;
  mutable std::mutex mutex_;
  std::vector<std::string> asked_;
};

struct AgentLimits {
  int planner_rounds = 5;
  int max_repairs = 4;
  int reprompts = 1;
};

/// Question/answer rounds until the model emits a ```spec block.
/// Throws PlanningIncomplete, AnswerSourceClosed or PreconditionViolation.
DesignSpec plan(const std::string& initial_prompt, AnswerSource& answers, Gateway& gateway,
                const AgentLimits& limits = {});

// --- HDL generation and verification --------------------------------------------

struct HdlArtifact {
  std::string top_module;
  std::vector<SourceFile> source_files;
  bool lint_clean = false;
  std::string logic_check_notes;
  int revision = 0;

  bool operator==(const HdlArtifact&) const = default;
};

nlohmann::json to_json(const HdlArtifact& artifact);
HdlArtifact hdl_artifact_from_json(const nlohmann::json& doc);

/// Names declared with `module <name>` in Verilog text, in order.
std::vector<std::string> declared_modules(std::string_view verilog);

/// Decomposition call (tag "decompose") then one call per submodule and one
/// for the top (tag "hdl"). Throws GenerationEmpty.
HdlArtifact generate_hdl(const DesignSpec& spec, Gateway& gateway);

/// Logic check (tag "logic_check") and lint per revision; repairs (tag
/// "repair") until lint is clean. Throws VerificationExhausted or
/// LintBackendUnavailable.
HdlArtifact verify_hdl(HdlArtifact artifact, LintBackend& lint, Gateway& gateway, int max_repairs = 4);

// --- flow fixing and optimization -------------------------------------------------

/// One validated change list against `current` (tag "fix"). Throws
/// UnparseableProposal or UnknownParameter/ParameterOutOfRange after the reprompt.
FixProposal propose_fix(const IssueSet& issues, const PromptPayload& payload, const FlowConfig& current,
                        const ParameterRegistry& registry, Gateway& gateway, const AgentLimits& limits = {});

FlowConfig apply_fix(const FlowConfig& config, const FixProposal& fix);

struct Candidate {
  FlowConfig config;
  std::string rationale;
  std::vector<std::string> provenance_chunks;
};

/// Up to k distinct candidates (tag "optimize"), each differing from
/// `incumbent` in at least one registered parameter and absent from
/// `tried_hashes`. Throws NoViableCandidates.
std::vector<Candidate> propose_optimizations(const PromptPayload& payload, const OptimizationGoal& goal, int k,
                                             const FlowConfig& incumbent, const std::set<std::string>& tried_hashes,
                                             const ParameterRegistry& registry, Gateway& gateway,
                                             const AgentLimits& limits = {});

/// Registry defaults overlaid with the best-matching prior_config chunk.
FlowConfig initial_config(const DesignSpec& spec, const ParameterRegistry& registry, const Index* corpus,
                          std::vector<std::string> source_files = {});

}  // namespace flowpilot

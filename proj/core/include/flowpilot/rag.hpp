#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flowpilot/flow_config.hpp"
#include "flowpilot/goal.hpp"
#include "flowpilot/history.hpp"
#include "flowpilot/issues.hpp"
#include "flowpilot/metrics.hpp"

namespace flowpilot {

enum class ChunkKind { parameter_doc, flow_doc, prior_config, error_solution };

std::string_view to_string(ChunkKind kind);
std::optional<ChunkKind> chunk_kind_from_string(std::string_view text);

struct DocChunk {
  std::string id;
  ChunkKind kind = ChunkKind::flow_doc;
  std::string title;
  std::string body;
  std::vector<std::string> parameter_names;
  // Times this chunk was cited by a run that went on to improve the design.
  int reference_count = 0;

  bool operator==(const DocChunk&) const = default;
};

/// Parses one corpus file: a `---` delimited YAML front matter with id, kind,
/// title, parameter_names and reference_count, followed by the body.
/// Throws Error{MalformedChunk}.
DocChunk parse_chunk(std::string_view content, const std::string& origin = "<memory>");
std::string serialize_chunk(const DocChunk& chunk);

/// Immutable lexical index over a set of chunks.
class Index {
 public:
  explicit Index(std::vector<DocChunk> chunks);

  std::size_t size() const { return chunks_.size(); }
  const std::vector<DocChunk>& chunks() const { return chunks_; }
  const DocChunk* find(std::string_view id) const;

  /// 3 points per distinct query token found in the title or parameter names,
  /// 1 per token found in the body, times 1 + ln(1 + reference_count).
  double score(std::size_t chunk, std::string_view query) const;

 private:
  struct Terms {
    std::vector<std::string> heading;  // sorted, unique
    std::vector<std::string> body;     // sorted, unique
  };
  std::vector<DocChunk> chunks_;
  std::vector<Terms> terms_;
};

using IndexHandle = std::shared_ptr<const Index>;

/// Loads every `*.md` file below `corpus_dir` (layout corpus/<kind>/<id>.md).
/// Throws DuplicateChunkId, EmptyCorpus or MalformedChunk.
IndexHandle build_index(const std::filesystem::path& corpus_dir);
/// Throws DuplicateChunkId or EmptyCorpus.
IndexHandle build_index(std::vector<DocChunk> chunks);

/// Lower-cased [a-z0-9_] words; an identifier with underscores also yields its parts.
std::vector<std::string> query_terms(std::string_view text);

struct Query {
  std::string text;
  std::optional<Issue> originating_issue;
  std::optional<std::string> goal_tag;
};

struct QueryOptions {
  std::string flow_name = "OpenLane";
};

/// One query per issue ("<flow> <category keyword> <dominant parameter> <violation keyword>")
/// followed by one per weighted goal dimension ("Area reduction via FP_CORE_UTIL").
/// Duplicate texts are dropped.
std::vector<Query> formulate_queries(const IssueSet& issues, const FlowConfig& config,
                                     const OptimizationGoal* goal, const QueryOptions& options = {});

struct ScoredChunk {
  DocChunk chunk;
  double score = 0;
};

struct RetrievedContext {
  // Score descending, then reference_count descending, then id ascending.
  std::vector<ScoredChunk> entries;
  int per_query_depth = 5;

  std::vector<std::string> ids() const;
};

/// Top-n per query, unioned by id keeping the maximum score.
/// Throws EmptyIndex, or PreconditionViolation when n < 1.
RetrievedContext retrieve(const IndexHandle& index, std::span<const Query> queries, int n);

/// Union of two retrieval results, deduplicated by id with the maximum score.
RetrievedContext merge(const RetrievedContext& a, const RetrievedContext& b);

struct PromptPayload {
  std::string metrics_section;
  std::string errors_section;
  std::string history_section;
  std::string config_section;
  std::string retrieved_section;
  std::string goal_section;
  std::size_t total_size_chars = 0;
  std::vector<std::string> retrieved_ids;  // chunks that survived truncation

  /// Sections concatenated in order metrics, errors, history, config, retrieved, goal.
  std::string text() const;
};

inline constexpr std::size_t kDefaultPromptBudget = 24000;
inline constexpr int kDefaultRetrievalDepth = 5;

/// Renders the prompt payload. When over budget, drops retrieved chunks
/// lowest-score first, then history entries oldest first. Throws
/// BudgetTooSmallForMandatorySections, or PreconditionViolation if budget < 1000.
PromptPayload assemble_prompt(const RunMetrics& metrics, std::span<const FlowErrorRecord> errors,
                              const OptimizationHistory& history, const FlowConfig& config,
                              const RetrievedContext& retrieved, const OptimizationGoal* goal,
                              std::size_t budget_chars = kDefaultPromptBudget);

}  // namespace flowpilot

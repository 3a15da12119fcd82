#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowpilot/issues.hpp"
#include "flowpilot/job.hpp"
#include "flowpilot/proposal.hpp"

namespace flowpilot {

enum class OriginKind { baseline, fix, candidate };

std::string_view to_string(OriginKind kind);

/// Why a run was launched.
struct RunOrigin {
  OriginKind kind = OriginKind::baseline;
  int round = 0;
  std::optional<FixProposal> fix;
  std::string rationale;
  std::vector<std::string> provenance_chunks;
};

struct HistoryEntry {
  RunJob job;
  IssueSet issues;
  RunOrigin origin;
  // Absent for failed runs and for runs before the baseline exists.
  std::optional<double> scalar_cost;

  bool succeeded() const { return job.status == JobStatus::succeeded && job.metrics.has_value(); }
};

/// Append-only record of every run of one design.
class OptimizationHistory {
 public:
  void append(HistoryEntry entry);

  const std::vector<HistoryEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  /// Entry with the minimum scalar cost; first one wins ties.
  std::optional<std::size_t> best_index() const { return best_index_; }
  /// First successful run.
  std::optional<std::size_t> baseline_index() const { return baseline_index_; }
  std::optional<double> best_cost() const;

  /// Best-so-far scalar cost after each entry (absent until the baseline).
  std::vector<std::optional<double>> best_so_far() const;

 private:
  std::vector<HistoryEntry> entries_;
  std::optional<std::size_t> best_index_;
  std::optional<std::size_t> baseline_index_;
};

nlohmann::json to_json(const HistoryEntry& entry);
HistoryEntry history_entry_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const OptimizationHistory& history);
OptimizationHistory history_from_json(const nlohmann::json& doc);

}  // namespace flowpilot

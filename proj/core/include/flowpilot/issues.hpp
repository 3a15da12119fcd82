#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowpilot/metrics.hpp"

namespace flowpilot {

// Enumerator order is the secondary sort key of an IssueSet.
enum class IssueCategory { timing, area_congestion, routing, drc, lvs, flow_failure };
enum class Severity { info, warning, critical };

std::string_view to_string(IssueCategory category);
std::string_view to_string(Severity severity);

struct Issue {
  IssueCategory category = IssueCategory::timing;
  Severity severity = Severity::info;
  std::string location;
  std::string evidence;
  std::string suggested_topic;

  bool operator==(const Issue&) const = default;
};

/// Issues sorted critical-first, then by category, then by location and evidence.
struct IssueSet {
  std::vector<Issue> issues;

  bool empty() const { return issues.empty(); }
  std::size_t size() const { return issues.size(); }
  bool operator==(const IssueSet&) const = default;
};

/// Tunable cut-offs for the detection heuristics.
struct DetectionThresholds {
  double utilization_warning_pct = 70.0;
  double utilization_critical_pct = 85.0;
  // A negative slack larger than this fraction of the clock period is critical.
  double slack_critical_fraction = 0.10;
};

IssueSet detect(const RunMetrics& metrics, std::span<const FlowErrorRecord> errors,
                const DetectionThresholds& thresholds = {});

/// Canonical order used by detect(); exposed for callers that merge sets.
bool issue_order(const Issue& a, const Issue& b);

nlohmann::json to_json(const Issue& issue);
nlohmann::json to_json(const IssueSet& set);
IssueSet issue_set_from_json(const nlohmann::json& doc);

}  // namespace flowpilot

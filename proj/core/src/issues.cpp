#include "flowpilot/issues.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "flowpilot/error.hpp"
#include "text_util.hpp"

namespace flowpilot {

std::string_view to_string(IssueCategory category) {
  switch (category) {
    case IssueCategory::timing: return "timing";
    case IssueCategory::area_congestion: return "area_congestion";
    case IssueCategory::routing: return "routing";
    case IssueCategory::drc: return "drc";
    case IssueCategory::lvs: return "lvs";
    case IssueCategory::flow_failure: return "flow_failure";
  }
  return "timing";
}

std::string_view to_string(Severity severity) {
  switch (severity) {
    case Severity::info: return "info";
    case Severity::warning: return "warning";
    case Severity::critical: return "critical";
  }
  return "info";
}

bool issue_order(const Issue& a, const Issue& b) {
  // Higher severity first.
  return std::make_tuple(-static_cast<int>(a.severity), static_cast<int>(a.category), a.location,
                         a.evidence, a.suggested_topic) <
         std::make_tuple(-static_cast<int>(b.severity), static_cast<int>(b.category), b.location,
                         b.evidence, b.suggested_topic);
}

namespace {

void check_slack(const std::optional<double>& slack, const std::optional<double>& period,
                 const char* field, const char* location, const char* topic,
                 const DetectionThresholds& t, std::vector<Issue>& out) {
  if (!slack || *slack >= 0) return;
  Severity severity = Severity::critical;
  if (period) {
    severity = std::abs(*slack) > t.slack_critical_fraction * *period ? Severity::critical
                                                                       : Severity::warning;
  }
  out.push_back({IssueCategory::timing, severity, location,
                 std::string(field) + " = " + text::format_number(*slack), topic});
}

}  // namespace

IssueSet detect(const RunMetrics& m, std::span<const FlowErrorRecord> errors,
                const DetectionThresholds& t) {
  std::vector<Issue> out;
  check_slack(m.worst_setup_slack_ps, m.clock_period_ps, "worst_setup_slack_ps", "sta:setup",
              "CLOCK_PERIOD", t, out);
  check_slack(m.worst_hold_slack_ps, m.clock_period_ps, "worst_hold_slack_ps", "sta:hold",
              "PL_RESIZER_HOLD_SLACK_MARGIN", t, out);

  if (m.placement_utilization_pct && *m.placement_utilization_pct > t.utilization_warning_pct) {
    const auto severity = *m.placement_utilization_pct > t.utilization_critical_pct
                              ? Severity::critical
                              : Severity::warning;
    out.push_back({IssueCategory::area_congestion, severity, "placement",
                   "placement_utilization_pct = " + text::format_number(*m.placement_utilization_pct),
                   "FP_CORE_UTIL"});
  }
  if (m.drc_violation_count && *m.drc_violation_count > 0) {
    out.push_back({IssueCategory::drc, Severity::critical, "signoff:drc",
                   "drc_violation_count = " + std::to_string(*m.drc_violation_count),
                   "PL_TARGET_DENSITY"});
  }
  if (m.lvs_error_count && *m.lvs_error_count > 0) {
    out.push_back({IssueCategory::lvs, Severity::critical, "signoff:lvs",
                   "lvs_error_count = " + std::to_string(*m.lvs_error_count), "LVS"});
  }
  for (const auto& e : errors) {
    std::string evidence = e.code + ": " + e.message;
    if (!e.log_path.empty()) evidence += " (" + e.log_path + ")";
    out.push_back({IssueCategory::flow_failure, Severity::critical, std::string(to_string(e.stage)),
                   std::move(evidence), std::string(to_string(e.stage)) + " " + e.code});
  }
  std::stable_sort(out.begin(), out.end(), issue_order);
  return IssueSet{std::move(out)};
}

nlohmann::json to_json(const Issue& i) {
  return {{"category", std::string(to_string(i.category))},
          {"severity", std::string(to_string(i.severity))},
          {"location", i.location},
          {"evidence", i.evidence},
          {"suggested_topic", i.suggested_topic}};
}

nlohmann::json to_json(const IssueSet& set) {
  auto arr = nlohmann::json::array();
  for (const auto& i : set.issues) arr.push_back(to_json(i));
  return arr;
}

IssueSet issue_set_from_json(const nlohmann::json& doc) {
  IssueSet set;
  for (const auto& j : doc) {
    Issue i;
    const auto cat = j.at("category").get<std::string>();
    const auto sev = j.at("severity").get<std::string>();
    bool cat_ok = false, sev_ok = false;
    for (auto c : {IssueCategory::timing, IssueCategory::area_congestion, IssueCategory::routing,
                   IssueCategory::drc, IssueCategory::lvs, IssueCategory::flow_failure}) {
      if (to_string(c) == cat) i.category = c, cat_ok = true;
    }
    for (auto s : {Severity::info, Severity::warning, Severity::critical}) {
      if (to_string(s) == sev) i.severity = s, sev_ok = true;
    }
    if (!cat_ok || !sev_ok) fail(ErrorCode::PreconditionViolation, "bad issue document " + j.dump());
    i.location = j.at("location").get<std::string>();
    i.evidence = j.at("evidence").get<std::string>();
    i.suggested_topic = j.value("suggested_topic", "");
    set.issues.push_back(std::move(i));
  }
  return set;
}

}  // namespace flowpilot

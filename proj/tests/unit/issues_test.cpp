#include <gtest/gtest.h>

#include <random>

#include "flowpilot/issues.hpp"

using namespace flowpilot;

namespace {

RunMetrics clean() {
  RunMetrics m;
  m.clock_period_ps = 10000;
  m.worst_setup_slack_ps = 100;
  m.worst_hold_slack_ps = 50;
  m.placement_utilization_pct = 50;
  m.drc_violation_count = 0;
  m.lvs_error_count = 0;
  return m;
}

int rank(Severity s) { return s == Severity::critical ? 0 : s == Severity::warning ? 1 : 2; }

}  // namespace

TEST(Issues, CleanRunHasNoIssues) { EXPECT_TRUE(detect(clean(), {}).empty()); }

TEST(Issues, SlackBoundaryAtTenPercentOfPeriod) {
  auto m = clean();
  m.worst_setup_slack_ps = -1000;  // exactly 10%: not beyond it
  auto s = detect(m, {});
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s.issues[0].severity, Severity::warning);
  m.worst_setup_slack_ps = -1000.5;
  EXPECT_EQ(detect(m, {}).issues[0].severity, Severity::critical);
  m.worst_setup_slack_ps = 0;
  EXPECT_TRUE(detect(m, {}).empty());
}

TEST(Issues, HoldViolationIsTiming) {
  auto m = clean();
  m.worst_hold_slack_ps = -20;
  const auto s = detect(m, {});
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s.issues[0].category, IssueCategory::timing);
  EXPECT_NE(s.issues[0].evidence.find("worst_hold_slack_ps"), std::string::npos);
}

TEST(Issues, UtilizationThresholds) {
  auto m = clean();
  for (auto [util, expect] : std::vector<std::pair<double, int>>{{70, -1}, {70.1, 1}, {85, 1}, {85.1, 0}}) {
    m.placement_utilization_pct = util;
    const auto s = detect(m, {});
    if (expect < 0) {
      EXPECT_TRUE(s.empty()) << util;
    } else {
      ASSERT_EQ(s.size(), 1u) << util;
      EXPECT_EQ(s.issues[0].category, IssueCategory::area_congestion);
      EXPECT_EQ(rank(s.issues[0].severity), expect) << util;
    }
  }
}

TEST(Issues, FlowErrorsBecomeFlowFailures) {
  const FlowErrorRecord err{Stage::routing, "DRT-0305", "unresolved shorts", "logs/routing/detailed_route.log"};
  const auto s = detect(clean(), std::span<const FlowErrorRecord>(&err, 1));
  ASSERT_GE(s.size(), 1u);
  bool seen = false;
  for (const auto& i : s.issues) seen |= i.severity == Severity::critical;
  EXPECT_TRUE(seen);
}

TEST(Issues, MissingFieldsProduceNoIssues) { EXPECT_TRUE(detect(RunMetrics{}, {}).empty()); }

TEST(Issues, OutputIsSortedAndDeterministic) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> slack(-3000, 500), util(0, 100);
  for (int i = 0; i < 500; ++i) {
    auto m = clean();
    m.worst_setup_slack_ps = slack(rng);
    m.worst_hold_slack_ps = slack(rng);
    m.placement_utilization_pct = util(rng);
    m.drc_violation_count = rng() % 3;
    m.lvs_error_count = rng() % 2;
    const auto a = detect(m, {});
    EXPECT_EQ(a, detect(m, {}));
    EXPECT_TRUE(std::is_sorted(a.issues.begin(), a.issues.end(), issue_order));
    for (std::size_t k = 1; k < a.size(); ++k) EXPECT_LE(rank(a.issues[k - 1].severity), rank(a.issues[k].severity));
    EXPECT_EQ(issue_set_from_json(to_json(a)), a);
  }
}

TEST(Issues, WorseningSlackNeverLowersSeverity) {
  // Monotone in the violation size: as slack decreases the issue count and
  // worst severity never improve.
  auto m = clean();
  int prev_rank = 3;
  std::size_t prev_count = 0;
  for (double s = 500; s >= -5000; s -= 37.5) {
    m.worst_setup_slack_ps = s;
    const auto set = detect(m, {});
    const int r = set.empty() ? 3 : rank(set.issues[0].severity);
    EXPECT_LE(r, prev_rank) << s;
    EXPECT_GE(set.size(), prev_count) << s;
    prev_rank = r;
    prev_count = set.size();
  }
}

TEST(Issues, ThresholdsAreTunable) {
  auto m = clean();
  m.placement_utilization_pct = 65;
  DetectionThresholds t;
  t.utilization_warning_pct = 60;
  EXPECT_EQ(detect(m, {}, t).size(), 1u);
  EXPECT_TRUE(detect(m, {}).empty());
}

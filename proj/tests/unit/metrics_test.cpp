#include <gtest/gtest.h>

#include <random>

#include "flowpilot/error.hpp"
#include "flowpilot/metrics.hpp"
#include "test_support.hpp"

using namespace flowpilot;
using namespace flowpilot::testing;

namespace {

RunMetrics ppa(double area, double delay, double power) {
  RunMetrics m;
  m.area_um2 = area;
  m.area_source = AreaSource::cell;
  m.critical_path_delay_ps = delay;
  m.power_uw = power;
  return m;
}

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no Error thrown";
  return ErrorCode::PreconditionViolation;
}

}  // namespace

TEST(Metrics, DeltaMatchesHandComputedValues) {
  const auto d = compute_delta(ppa(7229, 15284, 77), ppa(4650, 9955, 32));
  EXPECT_NEAR(*d.area_delta_pct, (4650.0 - 7229.0) / 7229.0 * 100.0, 1e-12);
  EXPECT_NEAR(*d.area_delta_pct, -35.675750, 1e-6);
  EXPECT_NEAR(*d.delay_delta_pct, -34.866527, 1e-6);
  EXPECT_NEAR(*d.power_delta_pct, -58.441558, 1e-6);
}

TEST(Metrics, DeltaRandomizedProperties) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> v(1.0, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double b = v(rng), o = v(rng);
    const auto d = compute_delta(ppa(b, b, b), ppa(o, o, o));
    // Reconstruct the optimized value from the delta.
    EXPECT_NEAR(b * (1 + *d.area_delta_pct / 100), o, 1e-9 * std::max(b, o));
    EXPECT_EQ(*d.area_delta_pct < 0, o < b);
    EXPECT_GT(*d.area_delta_pct, -100.0);
    const auto r = compute_ratio(ppa(o, o, o), ppa(b, b, b));
    EXPECT_NEAR(*r.area_ratio, o / b, 1e-12 * o / b);
    EXPECT_NEAR((*r.area_ratio - 1) * 100, *d.area_delta_pct, 1e-9 * std::abs(*d.area_delta_pct) + 1e-9);
  }
}

TEST(Metrics, DeltaSkipsMetricsMissingOnEitherSide) {
  auto base = ppa(100, 200, 300);
  auto opt = ppa(50, 100, 150);
  opt.power_uw.reset();
  const auto d = compute_delta(base, opt);
  EXPECT_TRUE(d.area_delta_pct);
  EXPECT_FALSE(d.power_delta_pct);
  EXPECT_EQ(code_of([] { compute_delta(RunMetrics{}, RunMetrics{}); }), ErrorCode::PreconditionViolation);
}

TEST(Metrics, ZeroBaselineAndReferenceAreRejected) {
  EXPECT_EQ(code_of([] { compute_delta(ppa(0, 1, 1), ppa(1, 1, 1)); }), ErrorCode::DivisionByZeroBaseline);
  EXPECT_EQ(code_of([] { compute_ratio(ppa(1, 1, 1), ppa(1, 0, 1)); }), ErrorCode::DivisionByZeroReference);
}

TEST(Metrics, PublishedFixturesParse) {
  for (const char* name : {"c880", "c2670", "c5315", "s298", "s349", "s838", "c6288", "mult16_pipelined"}) {
    for (const char* side : {"baseline", "optimized"}) {
      const auto a = parse_run_artifacts(fixture(std::string("reports/") + name + "/" + side));
      EXPECT_EQ(a.metrics.design_name, name);
      EXPECT_TRUE(a.metrics.area_um2 && a.metrics.critical_path_delay_ps && a.metrics.power_uw) << name;
      EXPECT_TRUE(a.errors.empty());
    }
  }
}

TEST(Metrics, OpenLaneStyleRunDirectory) {
  const auto a = parse_run_artifacts(fixture("runs/drc_routing"));
  const auto& m = a.metrics;
  EXPECT_EQ(m.design_name, "alu8");
  EXPECT_DOUBLE_EQ(*m.area_um2, 4650.0);
  EXPECT_EQ(m.area_source, AreaSource::cell);
  EXPECT_NEAR(*m.power_uw, 32.0, 1e-9);  // 3.2e-05 W
  EXPECT_NEAR(*m.clock_period_ps, 10000.0, 1e-9);
  EXPECT_NEAR(*m.critical_path_delay_ps, 9955.0, 1e-9);
  EXPECT_EQ(*m.drc_violation_count, 3);
  EXPECT_FALSE(m.lvs_error_count);
  EXPECT_FALSE(m.worst_setup_slack_ps);
  ASSERT_EQ(a.errors.size(), 1u);
  EXPECT_EQ(a.errors[0].stage, Stage::routing);
  EXPECT_EQ(a.errors[0].code, "DRT-0305");
  EXPECT_EQ(a.errors[0].log_path, "logs/routing/detailed_route.log");
}

TEST(Metrics, StaReportSlacksInPicoseconds) {
  const auto m = parse_run_artifacts(fixture("runs/sta_only")).metrics;
  EXPECT_NEAR(*m.worst_setup_slack_ps, 40.0, 1e-6);
  EXPECT_NEAR(*m.worst_hold_slack_ps, 120.0, 1e-6);
  EXPECT_NEAR(*m.critical_path_delay_ps, 9960.0, 1e-6);
  EXPECT_FALSE(m.area_um2);
  EXPECT_FALSE(m.power_uw);
}

TEST(Metrics, MissingReports) {
  EXPECT_EQ(code_of([] { parse_run_artifacts(fixture("runs/empty")); }), ErrorCode::MissingReports);
  EXPECT_EQ(code_of([] { parse_run_artifacts(fixture("runs/does_not_exist")); }), ErrorCode::MissingReports);
}

TEST(Metrics, DieBoundingBoxFillsDieArea) {
  TempDir dir;
  write_text(dir / "metrics.csv", "design__die__bbox,power__total\n0.0 0.0 167.34 165.96,0.001\n");
  const auto m = parse_run_artifacts(dir.path()).metrics;
  EXPECT_NEAR(*m.die_width_um, 167.34, 1e-9);
  EXPECT_NEAR(*m.die_height_um, 165.96, 1e-9);
  EXPECT_EQ(m.area_source, AreaSource::die);
  EXPECT_NEAR(*m.area_um2, 167.34 * 165.96, 1e-6);
  EXPECT_NEAR(*m.power_uw, 1000.0, 1e-9);
}

TEST(Metrics, MalformedCsvReportsFileAndOffset) {
  TempDir dir;
  write_text(dir / "metrics.csv", "design__instance__area,power__total\n12.5,abc\n");
  try {
    parse_run_artifacts(dir.path());
    FAIL();
  } catch (const MalformedReport& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedReport);
    EXPECT_EQ(e.file().filename(), "metrics.csv");
    EXPECT_EQ(e.byte_offset(), 41u);  // start of "abc"
  }
}

TEST(Metrics, JsonRoundTrip) {
  RunMetrics m = ppa(1234.5, 6789.25, 42.125);
  m.design_name = "x";
  m.die_width_um = 10;
  m.die_height_um = 20;
  m.worst_setup_slack_ps = -5;
  m.drc_violation_count = 7;
  EXPECT_EQ(metrics_from_json(to_json(m)), m);
  TempDir dir;
  write_metrics_json(dir / "metrics.json", m);
  EXPECT_EQ(read_metrics_json(dir / "metrics.json"), m);
  // Absent fields stay absent.
  EXPECT_FALSE(metrics_from_json(to_json(m)).lvs_error_count);
}

TEST(Metrics, FuzzedReportsNeverEscapeAsForeignExceptions) {
  std::mt19937 rng(99);
  const std::string alphabet = "0123456789.,-e \n\"{}[]:abcdefghijklmnopqrstuvwxyz_";
  const std::string seeds[] = {
      "design__instance__area,power__total\n4650.0,3.2e-05\n",
      "{\"design_name\":\"a\",\"area_um2\":5}",
      "violation met1 spacing\n",
      "  9.96    9.96   data arrival time\n   0.04   slack (MET)\n",
  };
  const char* names[] = {"metrics.csv", "metrics.json", "drc.rpt", "sta.rpt"};
  for (int i = 0; i < 400; ++i) {
    const int which = i % 4;
    std::string text = seeds[which];
    const int edits = 1 + rng() % 6;
    for (int e = 0; e < edits; ++e) {
      const std::size_t pos = text.empty() ? 0 : rng() % text.size();
      switch (rng() % 3) {
        case 0: text.insert(pos, 1, alphabet[rng() % alphabet.size()]); break;
        case 1: if (!text.empty()) text.erase(pos, 1); break;
        default: if (!text.empty()) text[pos] = alphabet[rng() % alphabet.size()];
      }
    }
    TempDir dir;
    write_text(dir / names[which], text);
    try {
      parse_run_artifacts(dir.path());
    } catch (const Error&) {
      // expected for damaged input
    } catch (const std::exception& e) {
      FAIL() << "foreign exception for input:\n" << text << "\n" << e.what();
    }
  }
}

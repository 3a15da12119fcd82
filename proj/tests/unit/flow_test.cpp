#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <thread>

#include "flowpilot/error.hpp"
#include "flowpilot/flow.hpp"
#include "flowpilot/ppa_model.hpp"
#include "test_support.hpp"

using namespace flowpilot;
using namespace flowpilot::testing;
using namespace std::chrono_literals;

namespace {

FlowConfig config(const std::string& design, double util = 50, double clock = 10) {
  FlowConfig c;
  c.design_name = design;
  c.parameters = ParameterRegistry::shipped().defaults();
  c.parameters["FP_CORE_UTIL"] = util;
  c.parameters["CLOCK_PERIOD"] = clock;
  return c;
}

struct Expected {
  double area, delay, power, slack;
};

// Closed-form model written out with the shipped coefficients for the default
// design and strategy "AREA 0", density 0.55.
Expected hand_model(double A0, double D0, double u, double T) {
  const double nominal = D0;
  const double p = std::clamp((nominal - 1000 * T) / nominal, -0.6, 0.4);
  const double area = A0 * (1 + 0.6 * p) * 100 / u;
  const double delay = nominal * (1 - 0.5 * p) + 60 * std::max(0.0, u - 60);
  return {area, delay, 0.01 * area + 2e6 / delay, 1000 * T - delay};
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

TEST(PpaModel, BaselineMatchesHandValues) {
  const auto m = PpaModel::shipped().evaluate(config("some_design"), ParameterRegistry::shipped());
  EXPECT_NEAR(*m.area_um2, 37333.33, 0.01);
  EXPECT_NEAR(*m.critical_path_delay_ps, 9500.0, 1e-9);
  EXPECT_NEAR(*m.power_uw, 583.86, 0.01);
  EXPECT_NEAR(*m.worst_setup_slack_ps, 500.0, 1e-9);
  EXPECT_EQ(*m.drc_violation_count, 0);
  EXPECT_EQ(m.area_source, AreaSource::die);
}

TEST(PpaModel, GridMatchesClosedForm) {
  for (const auto& [name, A0, D0] : std::vector<std::tuple<std::string, double, double>>{
           {"whatever", 20000, 9000}, {"alu8", 4500, 9800}, {"mult16", 30000, 14000}, {"counter8", 1200, 3500}}) {
    for (double u : {20.0, 35.0, 50.0, 60.0, 65.0, 80.0})
      for (double t : {2.0, 5.0, 7.5, 10.0, 12.5, 15.0, 40.0}) {
        const auto m = PpaModel::shipped().evaluate(config(name, u, t), ParameterRegistry::shipped());
        const auto e = hand_model(A0, D0, u, t);
        EXPECT_NEAR(*m.area_um2, e.area, 1e-6 * e.area) << name << " " << u << " " << t;
        EXPECT_NEAR(*m.critical_path_delay_ps, e.delay, 1e-6 * e.delay);
        EXPECT_NEAR(*m.power_uw, e.power, 1e-6 * e.power);
        EXPECT_NEAR(*m.worst_setup_slack_ps, e.slack, 1e-6);
        EXPECT_NEAR(*m.die_width_um * *m.die_height_um, *m.area_um2, 1e-6 * e.area);
      }
  }
}

TEST(PpaModel, DensityDrivesDrcAndDelay) {
  auto c = config("d");
  c.parameters["PL_TARGET_DENSITY"] = 0.95;
  const auto m = PpaModel::shipped().evaluate(c, ParameterRegistry::shipped());
  EXPECT_EQ(*m.drc_violation_count, static_cast<std::int64_t>(std::ceil((0.95 - 0.85) * 100)));
  EXPECT_NEAR(*m.critical_path_delay_ps, 9500 + 4000 * (0.95 - 0.75), 1e-6);
}

TEST(Flow, SimulatedExecuteWritesParseableMetrics) {
  TempDir dir;
  SimulatedBackend backend;
  const auto cfg = config("alu8", 45, 12.5);
  const auto r = execute(backend, cfg, dir / "run");
  ASSERT_TRUE(r.succeeded);
  auto expected = PpaModel::shipped().evaluate(cfg, ParameterRegistry::shipped());
  auto got = *r.metrics;
  got.run_wall_seconds.reset();
  expected.run_wall_seconds.reset();
  EXPECT_EQ(got, expected);
  EXPECT_TRUE(fs::exists(dir / "run" / "logs" / "flow.log"));
  EXPECT_EQ(code_of([&] { execute(backend, cfg, dir / "run"); }), ErrorCode::RunDirectoryConflict);
}

TEST(Flow, ParametersAreCheckedBeforeLaunch) {
  TempDir dir;
  SimulatedBackend backend;
  auto bad = config("d");
  bad.parameters["NO_SUCH_PARAMETER"] = 1.0;
  EXPECT_EQ(code_of([&] { execute(backend, bad, dir / "a"); }), ErrorCode::UnknownParameter);
  auto range = config("d", 500);
  EXPECT_EQ(code_of([&] { execute(backend, range, dir / "b"); }), ErrorCode::ParameterOutOfRange);
  EXPECT_EQ(backend.invocations(), 0);
  EXPECT_FALSE(fs::exists(dir / "a"));
}

TEST(Flow, FailureHookProducesStageErrors) {
  TempDir dir;
  SimulatedBackend backend;
  backend.set_failure_hook([](const FlowConfig& c) -> std::optional<FlowErrorRecord> {
    if (numeric_parameter(c, "FP_CORE_UTIL") > 60.0) return FlowErrorRecord{Stage::routing, "GRT-0116", "congestion", ""};
    return std::nullopt;
  });
  const auto r = execute(backend, config("d", 70), dir / "run");
  EXPECT_FALSE(r.succeeded);
  EXPECT_FALSE(r.metrics);
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.errors[0].stage, Stage::routing);
  EXPECT_EQ(r.errors[0].code, "GRT-0116");
  EXPECT_TRUE(execute(backend, config("d", 60), dir / "ok").succeeded);
}

TEST(Flow, TimeoutAndCancellation) {
  TempDir dir;
  SimulatedBackend backend(PpaModel::shipped(), ParameterRegistry::shipped(), 5s);
  const auto t0 = std::chrono::steady_clock::now();
  ExecuteOptions o;
  o.timeout = 50ms;
  const auto r = execute(backend, config("d"), dir / "t", ParameterRegistry::shipped(), o);
  EXPECT_LT(std::chrono::steady_clock::now() - t0, 2s);
  EXPECT_FALSE(r.succeeded);
  ASSERT_FALSE(r.errors.empty());
  EXPECT_EQ(r.errors.back().code, "TIMEOUT");

  std::stop_source stop;
  std::jthread killer([&] {
    std::this_thread::sleep_for(50ms);
    stop.request_stop();
  });
  ExecuteOptions c;
  c.stop = stop.get_token();
  const auto rc = execute(backend, config("d"), dir / "c", ParameterRegistry::shipped(), c);
  EXPECT_FALSE(rc.succeeded);
  EXPECT_EQ(rc.errors.back().code, "ABORTED");
}

TEST(Flow, JobIdsAndDirectories) {
  const auto cfg = config("alu8");
  const auto jobs = plan_jobs({cfg, config("alu8", 40)}, "/runs", 7);
  ASSERT_EQ(jobs.size(), 2u);
  EXPECT_EQ(jobs[0].job_id, "0007-" + content_hash(cfg).substr(0, 8));
  EXPECT_EQ(jobs[1].ordinal, 8);
  EXPECT_EQ(jobs[0].run_directory, "/runs/alu8/" + jobs[0].job_id);
  EXPECT_EQ(content_hash(cfg).size(), 64u);
}

TEST(Flow, ParallelRunnerBoundsConcurrencyAndKeepsOrder) {
  TempDir dir;
  SimulatedBackend backend(PpaModel::shipped(), ParameterRegistry::shipped(), 40ms);
  std::vector<FlowConfig> configs;
  for (int i = 0; i < 12; ++i) configs.push_back(config("d", 30 + i * 3));
  for (int p : {1, 3, 5}) {
    backend.reset_counters();
    std::vector<std::string> updates;
    ParallelOptions o;
    o.on_update = [&](const RunJob& j) { updates.push_back(j.job_id + ":" + std::string(to_string(j.status))); };
    const auto jobs = plan_jobs(configs, dir / ("p" + std::to_string(p)));
    const auto done = run_parallel(backend, jobs, p, ParameterRegistry::shipped(), o);
    EXPECT_LE(backend.high_water_mark(), p);
    EXPECT_EQ(backend.high_water_mark(), p);
    ASSERT_EQ(done.size(), jobs.size());
    for (std::size_t i = 0; i < done.size(); ++i) {
      EXPECT_EQ(done[i].job_id, jobs[i].job_id);
      EXPECT_EQ(done[i].status, JobStatus::succeeded);
      EXPECT_TRUE(done[i].metrics);
    }
    EXPECT_EQ(updates.size(), 24u);
  }
}

TEST(Flow, ParallelRunnerRecordsPerJobFailures) {
  TempDir dir;
  SimulatedBackend backend;
  auto bad = config("d");
  bad.parameters["NO_SUCH_PARAMETER"] = 1.0;
  const auto done = run_parallel(backend, plan_jobs({config("d"), bad}, dir.path()), 2);
  EXPECT_EQ(done[0].status, JobStatus::succeeded);
  EXPECT_EQ(done[1].status, JobStatus::failed);
  EXPECT_EQ(done[1].errors[0].code, "UnknownParameter");
}

TEST(Flow, ProcessBackendRunsExternalCommand) {
  TempDir dir;
  const auto script = dir / "fake_flow.sh";
  write_text(script,
             "#!/bin/sh\n"
             "cfg=\"$1\"\n"
             "grep -q '\"DESIGN_NAME\": \"alu8\"' \"$cfg\" || exit 3\n"
             "echo '[STAGE] routing'\n"
             "printf 'design__instance__area,power__total,critical_path_ns\\n4650.0,3.2e-05,9.955\\n' > \"$FLOWPILOT_RUN_DIR/metrics.csv\"\n");
  fs::permissions(script, fs::perms::owner_all);
  ProcessBackend backend({script.string()});
  const auto r = execute(backend, config("alu8"), dir / "run");
  ASSERT_TRUE(r.succeeded) << (r.errors.empty() ? "" : r.errors[0].message);
  EXPECT_DOUBLE_EQ(*r.metrics->area_um2, 4650.0);
  EXPECT_NEAR(*r.metrics->power_uw, 32.0, 1e-9);
  EXPECT_TRUE(fs::exists(dir / "run" / "config.json"));

  const auto other = execute(backend, config("other"), dir / "run2");
  EXPECT_FALSE(other.succeeded);
  EXPECT_EQ(other.errors.back().code, "EXIT-3");

  ProcessBackend missing({"/definitely/not/here"});
  EXPECT_EQ(code_of([&] { execute(missing, config("alu8"), dir / "run3"); }), ErrorCode::BackendNotFound);
}

#include <gtest/gtest.h>

#include <sstream>

#include "cli.hpp"
#include "test_support.hpp"

using namespace flowpilot;
using namespace flowpilot::testing;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run_cli(std::vector<std::string> args, const std::string& input = "") {
  std::ostringstream out, err;
  std::istringstream in(input);
  const int code = cli::run(args, out, err, in);
  return {code, out.str(), err.str()};
}

std::vector<std::string> with_state(const TempDir& dir, std::vector<std::string> args) {
  std::vector<std::string> all = {"--state-dir", (dir / "state").string(), "--mock-script",
                                  fixture("mock_script/alu8").string()};
  all.insert(all.end(), args.begin(), args.end());
  return all;
}

}  // namespace

TEST(Cli, ExitCodesPerFamily) {
  EXPECT_EQ(cli::exit_code(ErrorFamily::Usage), 2);
  EXPECT_EQ(cli::exit_code(ErrorFamily::NotFound), 3);
  EXPECT_EQ(cli::exit_code(ErrorFamily::Input), 4);
  EXPECT_EQ(cli::exit_code(ErrorFamily::Agent), 5);
  EXPECT_EQ(cli::exit_code(ErrorFamily::Flow), 6);
  EXPECT_EQ(cli::exit_code(ErrorFamily::Pipeline), 7);
  EXPECT_EQ(cli::exit_code(ErrorFamily::Internal), 1);
}

TEST(Cli, ReportFromPublishedFixtures) {
  const auto r = run_cli({"report", "--baseline", fixture("reports/c880/baseline/metrics.json").string(), "--optimized",
                          fixture("reports/c880/optimized/metrics.json").string(), "--label", "c880"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("-35.68"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("-58.44"), std::string::npos);

  const auto csv = run_cli({"report", "--csv", "--baseline", fixture("reports/c880/baseline").string(), "--optimized",
                            fixture("reports/c880/optimized").string()});
  ASSERT_EQ(csv.code, 0) << csv.err;
  EXPECT_EQ(csv.out.rfind("design,area_base", 0), 0u);

  const auto missing = run_cli({"report", "--baseline", "/no/such/metrics.json", "--optimized", "/no/either.json"});
  EXPECT_EQ(missing.code, 3);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
  EXPECT_EQ(run_cli({"new", "--goal", "speed", "--prompt", "x"}).code, 2);
  EXPECT_EQ(run_cli({"report"}).code, 2);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST(Cli, ConfigErrorsExitWithUsage) {
  TempDir dir;
  write_text(dir / "bad.ini", "[run]\nparallelism = 0\n");
  const auto r = run_cli({"--config", (dir / "bad.ini").string(), "status"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("run.parallelism"), std::string::npos) << r.err;
}

TEST(Cli, NewStatusOptimizeCycle) {
  TempDir dir;
  const auto unknown = run_cli(with_state(dir, {"status", "nope"}));
  EXPECT_EQ(unknown.code, 3);

  const auto created = run_cli(with_state(dir, {"new", "--prompt", kAlu8Prompt, "--answers",
                                                fixture("answers/alu8.json").string(), "--id", "alu8", "--goal",
                                                "area", "--stop-after-runs", "5"}));
  ASSERT_EQ(created.code, 0) << created.err;
  EXPECT_NE(created.out.find("phase     done"), std::string::npos) << created.out;

  const auto status = run_cli(with_state(dir, {"status", "alu8", "--json"}));
  ASSERT_EQ(status.code, 0) << status.err;
  const auto doc = nlohmann::json::parse(status.out);
  EXPECT_EQ(doc["phase"], "done");
  EXPECT_EQ(doc["history"]["entries"].size(), 5u);

  const auto more = run_cli(with_state(dir, {"optimize", "alu8", "--runs", "3", "--json"}));
  ASSERT_EQ(more.code, 0) << more.err;
  EXPECT_EQ(nlohmann::json::parse(more.out)["history"]["entries"].size(), 8u);

  const auto dup = run_cli(with_state(dir, {"new", "--prompt", kAlu8Prompt, "--answers",
                                            fixture("answers/alu8.json").string(), "--id", "alu8"}));
  EXPECT_EQ(dup.code, 7);

  const auto report = run_cli(with_state(dir, {"report", "alu8"}));
  ASSERT_EQ(report.code, 0) << report.err;
  EXPECT_NE(report.out.find("alu8"), std::string::npos);
}

TEST(Cli, InteractiveAnswersAndClosedInput) {
  TempDir dir;
  const auto ok = run_cli(with_state(dir, {"new", "--prompt", kAlu8Prompt, "--id", "a", "--stop-after-runs", "2"}),
                          "add, subtract, and, or, xor\nno\n");
  ASSERT_EQ(ok.code, 0) << ok.err;
  EXPECT_NE(ok.err.find("? Which operations must the ALU support?"), std::string::npos) << ok.err;

  const auto closed = run_cli(with_state(dir, {"new", "--prompt", kAlu8Prompt, "--id", "b"}), "");
  EXPECT_EQ(closed.code, 5);
}

TEST(Cli, CorpusQueryAndBench) {
  const auto q = run_cli({"corpus", "query", "OpenLane timing optimization CLOCK_PERIOD", "--json", "--depth", "3"});
  ASSERT_EQ(q.code, 0) << q.err;
  const auto hits = nlohmann::json::parse(q.out);
  ASSERT_EQ(hits.size(), 3u);
  bool found = false;
  for (const auto& h : hits) found = found || h["id"] == "clock_period";
  EXPECT_TRUE(found);

  const auto b = run_cli({"bench-parallel", "--jobs", "8", "--duration", "0.05", "--p", "4", "--json"});
  ASSERT_EQ(b.code, 0) << b.err;
  const auto r = nlohmann::json::parse(b.out);
  EXPECT_EQ(r["parallel_high_water"], 4);
  EXPECT_EQ(r["serial_high_water"], 1);
  EXPECT_GT(r["speedup"].get<double>(), 2.0);
}

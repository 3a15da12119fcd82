#include <gtest/gtest.h>

#include <thread>

#include <httplib.h>

#include "flowpilot/error.hpp"
#include "flowpilot/service.hpp"
#include "test_support.hpp"

using namespace flowpilot;
using namespace flowpilot::testing;
using namespace std::chrono_literals;
using nlohmann::json;

namespace {

class ServiceFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    store_ = std::make_unique<StateStore>(dir_ / "state");
    ServiceOptions so;
    so.question_timeout = 20s;
    so.event_poll = 10ms;
    service_ = std::make_unique<Service>(
        *store_,
        [](std::shared_ptr<AnswerSource> answers) {
          auto m = alu8_backends();
          auto set = m.set();
          set.answers = std::move(answers);
          return set;
        },
        PipelineOptions{}, so);
    port_ = service_->bind_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    server_ = std::thread([this] { service_->listen_after_bind(); });
    service_->wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(10, 0);
  }

  void TearDown() override {
    service_->stop();
    server_.join();
  }

  json get(const std::string& path, int expected = 200) {
    auto r = client_->Get(path);
    EXPECT_TRUE(r) << path;
    if (!r) return json();
    EXPECT_EQ(r->status, expected) << path << ": " << r->body;
    return json::parse(r->body);
  }

  httplib::Result post(const std::string& path, const json& body) {
    return client_->Post(path, body.dump(), "application/json");
  }

  // Polls the state document until `pred` holds.
  json wait_for(const std::string& id, const std::function<bool(const json&)>& pred) {
    const auto deadline = std::chrono::steady_clock::now() + 30s;
    while (std::chrono::steady_clock::now() < deadline) {
      auto r = client_->Get("/designs/" + id);
      if (r && r->status == 200) {
        auto doc = json::parse(r->body);
        if (pred(doc)) return doc;
      }
      std::this_thread::sleep_for(10ms);
    }
    ADD_FAILURE() << "condition not reached for " << id;
    return json();
  }

  TempDir dir_;
  std::unique_ptr<StateStore> store_;
  std::unique_ptr<Service> service_;
  std::unique_ptr<httplib::Client> client_;
  std::thread server_;
  int port_ = 0;
};

json small_goal(int runs) {
  auto g = OptimizationGoal::preset(GoalPriority::area);
  g.stop_after_runs = runs;
  return to_json(g);
}

std::vector<std::pair<std::uint64_t, json>> parse_sse(const std::string& body) {
  std::vector<std::pair<std::uint64_t, json>> out;
  std::istringstream in(body);
  std::string line;
  std::uint64_t id = 0;
  while (std::getline(in, line)) {
    if (line.rfind("id: ", 0) == 0) id = std::stoull(line.substr(4));
    if (line.rfind("data: ", 0) == 0) out.emplace_back(id, json::parse(line.substr(6)));
  }
  return out;
}

}  // namespace

TEST_F(ServiceFixture, CreateAnswerAndFollowToCompletion) {
  auto created = post("/designs", {{"prompt", kAlu8Prompt}, {"design_id", "alu8"}, {"goal", small_goal(8)}});
  ASSERT_TRUE(created);
  ASSERT_EQ(created->status, 201) << created->body;
  EXPECT_EQ(json::parse(created->body)["design_id"], "alu8");

  auto dup = post("/designs", {{"prompt", kAlu8Prompt}, {"design_id", "alu8"}});
  ASSERT_TRUE(dup);
  EXPECT_EQ(dup->status, 409);

  const std::vector<std::string> answers = {"add, subtract, and, or, xor", "no, purely combinational"};
  for (int q = 1; q <= 2; ++q) {
    const auto doc = wait_for("alu8", [q](const json& d) {
      return d["pending_question"].is_object() && d["pending_question"]["question_id"] == q;
    });
    EXPECT_EQ(doc["phase"], "planning");
    EXPECT_EQ(doc["schema_version"], kStateSchemaVersion);
    // A stale question id is refused.
    auto wrong = post("/designs/alu8/answers", {{"question_id", q + 5}, {"answer", "x"}});
    ASSERT_TRUE(wrong);
    EXPECT_EQ(wrong->status, 409);
    auto ok = post("/designs/alu8/answers", {{"question_id", q}, {"answer", answers[q - 1]}});
    ASSERT_TRUE(ok);
    EXPECT_EQ(ok->status, 200) << ok->body;
  }

  const auto final_doc = wait_for("alu8", [](const json& d) { return d["phase"] == "done" && d["running"] == false; });
  EXPECT_EQ(final_doc["history"]["entries"].size(), 8u);
  EXPECT_TRUE(final_doc["pending_question"].is_null());

  auto late = post("/designs/alu8/answers", {{"answer", "too late"}});
  ASSERT_TRUE(late);
  EXPECT_EQ(late->status, 409);

  const auto list = get("/designs");
  ASSERT_EQ(list["designs"].size(), 1u);
  EXPECT_EQ(list["designs"][0]["phase"], "done");

  const auto runs = get("/designs/alu8/runs");
  ASSERT_EQ(runs["runs"].size(), 8u);
  const std::string job = runs["runs"][0]["job_id"];
  const auto metrics = get("/designs/alu8/runs/" + job + "/metrics");
  EXPECT_GT(metrics["area_um2"].get<double>(), 0);
  auto logs = client_->Get("/designs/alu8/runs/" + job + "/logs");
  ASSERT_TRUE(logs);
  EXPECT_EQ(logs->status, 200);
  EXPECT_NE(logs->body.find("flow.log"), std::string::npos);
  get("/designs/alu8/runs/0000-nothere/metrics", 404);

  // Full event replay, then a resumed stream after Last-Event-ID.
  auto all = client_->Get("/designs/alu8/events?follow=0");
  ASSERT_TRUE(all);
  EXPECT_EQ(all->get_header_value("Content-Type"), "text/event-stream");
  const auto events = parse_sse(all->body);
  ASSERT_GT(events.size(), 10u);
  for (std::size_t i = 0; i < events.size(); ++i) {
    EXPECT_EQ(events[i].first, i + 1);
    EXPECT_EQ(events[i].second["seq"], i + 1);
    EXPECT_EQ(events[i].second["schema_version"], kEventSchemaVersion);
  }
  EXPECT_EQ(events.back().second["type"], "cost");

  auto tail = client_->Get("/designs/alu8/events?follow=0", {{"Last-Event-ID", "5"}});
  ASSERT_TRUE(tail);
  const auto rest = parse_sse(tail->body);
  ASSERT_EQ(rest.size(), events.size() - 5);
  EXPECT_EQ(rest.front().first, 6u);
}

TEST_F(ServiceFixture, AbortWhileWaitingForAnswer) {
  auto created = post("/designs", {{"prompt", kAlu8Prompt}, {"design_id", "stuck"}});
  ASSERT_TRUE(created);
  ASSERT_EQ(created->status, 201);
  wait_for("stuck", [](const json& d) { return d["pending_question"].is_object(); });
  auto goal = post("/designs/stuck/goal", small_goal(5));
  ASSERT_TRUE(goal);
  EXPECT_EQ(goal->status, 202);
  auto abort = post("/designs/stuck/abort", json::object());
  ASSERT_TRUE(abort);
  EXPECT_EQ(abort->status, 202);
  const auto doc = wait_for("stuck", [](const json& d) { return d["phase"] == "aborted" && d["running"] == false; });
  EXPECT_EQ(doc["abort_code"], "Aborted");
  auto again = post("/designs/stuck/abort", json::object());
  ASSERT_TRUE(again);
  EXPECT_EQ(again->status, 409);
}

TEST_F(ServiceFixture, ErrorsUseStatusCodesAndErrorDocuments) {
  const auto missing = get("/designs/nothing", 404);
  EXPECT_EQ(missing["error"], "NotFound");
  get("/designs/nothing/runs", 404);
  auto events = client_->Get("/designs/nothing/events");
  ASSERT_TRUE(events);
  EXPECT_EQ(events->status, 404);
  auto answer = post("/designs/nothing/answers", {{"answer", "x"}});
  ASSERT_TRUE(answer);
  EXPECT_EQ(answer->status, 404);

  auto no_prompt = post("/designs", {{"design_id", "x"}});
  ASSERT_TRUE(no_prompt);
  EXPECT_EQ(no_prompt->status, 400);
  auto bad_json = client_->Post("/designs", "{not json", "application/json");
  ASSERT_TRUE(bad_json);
  EXPECT_EQ(bad_json->status, 400);
  EXPECT_EQ(json::parse(bad_json->body)["error"], "InvalidRequest");
  auto bad_goal = post("/designs", {{"prompt", "p"}, {"goal", {{"priority", "speed"}}}});
  ASSERT_TRUE(bad_goal);
  EXPECT_EQ(bad_goal->status, 400);
}

TEST(ServiceAnswers, PendingPostAndTimeout) {
  std::stop_source stop;
  ServiceAnswers answers(2s, stop.get_token());
  EXPECT_FALSE(answers.pending());
  EXPECT_FALSE(answers.post(std::nullopt, "x"));
  std::string got;
  std::thread asker([&] { got = answers.answer("why?"); });
  while (!answers.pending()) std::this_thread::sleep_for(1ms);
  EXPECT_EQ(answers.pending()->question, "why?");
  EXPECT_EQ(answers.pending()->question_id, 1);
  EXPECT_FALSE(answers.post(2, "wrong id"));
  EXPECT_TRUE(answers.post(1, "because"));
  asker.join();
  EXPECT_EQ(got, "because");

  ServiceAnswers quick(20ms, stop.get_token());
  try {
    quick.answer("anyone?");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AnswerSourceClosed);
  }
}

#include <gtest/gtest.h>

#include <cstdlib>
#include <random>
#include <thread>

#include <httplib.h>

#include "flowpilot/error.hpp"
#include "flowpilot/llm.hpp"
#include "test_support.hpp"

using namespace flowpilot;
using namespace flowpilot::testing;

namespace {

GenerationRequest req(std::string tag, std::string user = "hello") {
  GenerationRequest r;
  r.tag = std::move(tag);
  r.user_text = std::move(user);
  return r;
}

RetryPolicy recording(std::vector<std::chrono::milliseconds>& sleeps, int attempts = 3) {
  RetryPolicy p;
  p.max_attempts = attempts;
  p.sleep = [&sleeps](std::chrono::milliseconds d) { sleeps.push_back(d); };
  return p;
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

TEST(Money, MicroDollarArithmetic) {
  EXPECT_EQ(Money::from_usd(0.48).micros(), 480000);
  EXPECT_EQ(Money::from_usd(0.48).str(), "0.480000");
  EXPECT_EQ(Money::from_usd(-1.5).str(), "-1.500000");
  EXPECT_EQ(Money::from_usd(0.0000005).micros(), 1);  // half rounds away from zero
  Money sum;
  for (int i = 0; i < 10; ++i) sum += Money::from_usd(0.1);
  EXPECT_EQ(sum, Money::from_usd(1.0));
}

TEST(Money, RateCardCost) {
  const RateCard rates{3.0, 15.0};
  // 1000 in at $3/M plus 200 out at $15/M = 0.003 + 0.003.
  EXPECT_EQ(rates.cost(1000, 200).micros(), 6000);
  EXPECT_EQ(estimate_tokens("abcde"), 2);
  EXPECT_EQ(estimate_tokens(""), 0);
}

TEST(Gateway, RetriesTransientFailuresWithBackoff) {
  MockProvider p({{"t", {"!transient", "!transient", "finally"}}});
  std::vector<std::chrono::milliseconds> sleeps;
  const auto r = generate(p, req("t"), recording(sleeps));
  EXPECT_EQ(r.text, "finally");
  EXPECT_EQ(r.attempts, 3);
  EXPECT_EQ(sleeps, (std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(100), std::chrono::milliseconds(200)}));
}

TEST(Gateway, ExhaustedRetriesAndAuthFailures) {
  {
    MockProvider p({{"t", {"!transient", "!transient"}}});
    std::vector<std::chrono::milliseconds> sleeps;
    EXPECT_EQ(code_of([&] { generate(p, req("t"), recording(sleeps, 2)); }), ErrorCode::ProviderUnavailable);
  }
  {
    MockProvider p({{"t", {"!auth", "never"}}});
    std::vector<std::chrono::milliseconds> sleeps;
    EXPECT_EQ(code_of([&] { generate(p, req("t"), recording(sleeps)); }), ErrorCode::AuthFailure);
    EXPECT_TRUE(sleeps.empty());
  }
  {
    MockProvider p({{"t", {std::string(100, 'x')}}});
    auto r = req("t");
    r.max_output_chars = 10;
    EXPECT_EQ(code_of([&] { generate(p, r); }), ErrorCode::ResponseTooLarge);
  }
  MockProvider p({});
  EXPECT_EQ(code_of([&] { generate(p, req("t", "")); }), ErrorCode::PreconditionViolation);
}

TEST(Gateway, MockScriptOrdinalsDefaultsAndCursor) {
  MockProvider p({{"a", {"a1", "a2"}}}, {{"a", "a-default"}});
  EXPECT_EQ(generate(p, req("a")).text, "a1");
  const auto cursor = p.cursor();
  EXPECT_EQ(generate(p, req("a")).text, "a2");
  EXPECT_EQ(generate(p, req("a")).text, "a-default");
  p.restore_cursor(cursor);
  EXPECT_EQ(generate(p, req("a")).text, "a2");
  EXPECT_THROW(generate(p, req("unscripted")), Error);
}

TEST(Gateway, LedgerEqualsSumOfResults) {
  std::mt19937 rng(5);
  std::map<std::string, std::vector<std::string>> script;
  const char* tags[] = {"plan", "hdl", "fix", "optimize"};
  for (const char* t : tags)
    for (int i = 0; i < 50; ++i) script[t].push_back(std::string(1 + rng() % 900, 'y'));
  Gateway g(std::make_shared<MockProvider>(script, std::map<std::string, std::string>{}, RateCard{2.5, 10.0}));
  Money manual;
  std::map<std::string, Money> per_tag;
  for (int i = 0; i < 150; ++i) {
    const char* tag = tags[rng() % 4];
    const std::int64_t chars = 1 + rng() % 3000;
    const auto r = g.generate(req(tag, std::string(chars, 'x')));
    // Independent cost: tokens are ceil(chars / 4) and the rates are per million.
    const std::int64_t in = (chars + 3) / 4, out = (static_cast<std::int64_t>(r.text.size()) + 3) / 4;
    EXPECT_EQ(r.input_tokens, in);
    EXPECT_NEAR(static_cast<double>(r.cost.micros()), in * 2.5 + out * 10.0, 0.5);
    manual += r.cost;
    per_tag[tag] += r.cost;
  }
  const auto ledger = g.ledger();
  EXPECT_EQ(ledger.total, manual);
  EXPECT_EQ(ledger.per_tag, per_tag);
  EXPECT_EQ(accumulate_cost(g.results()), ledger);
  EXPECT_EQ(cost_summary_from_json(to_json(ledger)), ledger);
}

TEST(Gateway, ConcurrentCallersKeepLedgerExact) {
  std::map<std::string, std::string> defaults{{"t", "reply"}};
  Gateway g(std::make_shared<MockProvider>(std::map<std::string, std::vector<std::string>>{}, defaults));
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t)
    threads.emplace_back([&] {
      for (int i = 0; i < 50; ++i) g.generate(req("t", "question text"));
    });
  for (auto& t : threads) t.join();
  EXPECT_EQ(g.results().size(), 200u);
  EXPECT_EQ(g.ledger().total, g.results().front().cost * 200);
}

TEST(HttpProvider, TalksChatCompletionsAndMapsStatuses) {
  httplib::Server server;
  std::atomic<int> status{200};
  std::string seen_auth, seen_body;
  server.Post("/v1/chat/completions", [&](const httplib::Request& r, httplib::Response& res) {
    seen_auth = r.get_header_value("Authorization");
    seen_body = r.body;
    res.status = status.load();
    res.set_content(R"({"choices":[{"message":{"content":"pong"}}],"usage":{"prompt_tokens":12,"completion_tokens":3}})",
                    "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ::setenv("FLOWPILOT_TEST_KEY", "secret", 1);
  HttpProviderOptions o;
  o.base_url = "http://127.0.0.1:" + std::to_string(port);
  o.model = "test-model";
  o.api_key_env = "FLOWPILOT_TEST_KEY";
  o.rates = {1.0, 2.0};
  HttpProvider p(o);
  auto request = req("plan", "ping");
  request.system_text = "sys";
  const auto r = generate(p, request);
  EXPECT_EQ(r.text, "pong");
  EXPECT_EQ(r.input_tokens, 12);
  EXPECT_EQ(r.output_tokens, 3);
  EXPECT_EQ(r.cost, (RateCard{1.0, 2.0}.cost(12, 3)));
  EXPECT_EQ(seen_auth, "Bearer secret");
  const auto body = nlohmann::json::parse(seen_body);
  EXPECT_EQ(body["model"], "test-model");
  EXPECT_EQ(body["messages"].size(), 2u);

  status = 401;
  EXPECT_EQ(code_of([&] { p.complete(request); }), ErrorCode::AuthFailure);
  status = 503;
  EXPECT_EQ(code_of([&] { p.complete(request); }), ErrorCode::TransientProviderFailure);
  status = 429;
  EXPECT_EQ(code_of([&] { p.complete(request); }), ErrorCode::TransientProviderFailure);
  ::unsetenv("FLOWPILOT_TEST_KEY");
  EXPECT_EQ(code_of([&] { p.complete(request); }), ErrorCode::AuthFailure);

  server.stop();
  worker.join();
}

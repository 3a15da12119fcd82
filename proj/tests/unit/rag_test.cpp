#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "flowpilot/error.hpp"
#include "flowpilot/rag.hpp"
#include "test_support.hpp"

using namespace flowpilot;
using namespace flowpilot::testing;

namespace {

DocChunk chunk(std::string id, std::string title, std::string body, int refs = 0,
               std::vector<std::string> params = {}) {
  DocChunk c;
  c.id = std::move(id);
  c.kind = ChunkKind::flow_doc;
  c.title = std::move(title);
  c.body = std::move(body);
  c.reference_count = refs;
  c.parameter_names = std::move(params);
  return c;
}

std::vector<Query> queries(std::initializer_list<const char*> texts) {
  std::vector<Query> out;
  for (const char* t : texts) out.push_back({t, std::nullopt, std::nullopt});
  return out;
}

}  // namespace

TEST(Rag, QueryTermsSplitIdentifiersAndDropStopwords) {
  EXPECT_EQ(query_terms("Fix the CLOCK_PERIOD via resizer!"),
            (std::vector<std::string>{"clock", "clock_period", "fix", "period", "resizer"}));
  EXPECT_TRUE(query_terms("a an the").empty());
}

TEST(Rag, ScoreMatchesHandComputation) {
  const auto index = build_index({chunk("x", "Alpha beta", "gamma delta alpha"),
                                  chunk("y", "Alpha beta", "gamma delta alpha", 4),
                                  chunk("z", "Other", "nothing", 0, {"SOME_PARAM"})});
  // alpha: heading 3 + body 1; gamma: body 1; zeta: none.
  EXPECT_DOUBLE_EQ(index->score(0, "alpha gamma zeta"), 5.0);
  EXPECT_DOUBLE_EQ(index->score(1, "alpha gamma zeta"), 5.0 * (1.0 + std::log(5.0)));
  // Repeated tokens count once.
  EXPECT_DOUBLE_EQ(index->score(0, "alpha alpha ALPHA"), 4.0);
  // Parameter names are part of the heading.
  EXPECT_DOUBLE_EQ(index->score(2, "some_param"), 3.0 * 3);  // some, param, some_param
  EXPECT_DOUBLE_EQ(index->score(2, "unrelated"), 0.0);
}

TEST(Rag, RetrievalOrderUsesScoreThenReferencesThenId) {
  const auto index = build_index({chunk("b", "t", "word"), chunk("a", "t", "word"), chunk("c", "t", "word", 0),
                                  chunk("d", "word", "", 0)});
  const auto q = queries({"word"});
  const auto r = retrieve(index, q, 4);
  EXPECT_EQ(r.ids(), (std::vector<std::string>{"d", "a", "b", "c"}));
  const auto top2 = retrieve(index, q, 2);
  EXPECT_EQ(top2.ids(), (std::vector<std::string>{"d", "a"}));
}

TEST(Rag, UnionKeepsMaximumScorePerChunk) {
  const auto index = build_index({chunk("a", "alpha", "beta"), chunk("b", "beta", "alpha")});
  const auto r = retrieve(index, queries({"alpha", "beta"}), 1);
  ASSERT_EQ(r.entries.size(), 2u);
  for (const auto& e : r.entries) EXPECT_DOUBLE_EQ(e.score, 3.0);
}

TEST(Rag, PartitionPropertyOnShippedCorpus) {
  const auto index = build_index(data_dir() / "corpus");
  std::vector<std::string> vocab;
  for (const auto& c : index->chunks())
    for (const auto& t : query_terms(c.title + " " + c.body.substr(0, 80))) vocab.push_back(t);
  std::mt19937 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Query> qs(2 + rng() % 5);
    for (auto& q : qs)
      for (int w = 0; w < 1 + static_cast<int>(rng() % 4); ++w) q.text += vocab[rng() % vocab.size()] + " ";
    const int n = 1 + rng() % 8;
    const std::size_t cut = 1 + rng() % (qs.size() - 1);
    const auto whole = retrieve(index, qs, n);
    const auto merged = merge(retrieve(index, std::span<const Query>(qs).first(cut), n),
                              retrieve(index, std::span<const Query>(qs).subspan(cut), n));
    ASSERT_EQ(whole.ids(), merged.ids());
    for (std::size_t i = 0; i < whole.entries.size(); ++i) EXPECT_EQ(whole.entries[i].score, merged.entries[i].score);
    // Each query contributes at most n chunks.
    EXPECT_LE(whole.entries.size(), qs.size() * static_cast<std::size_t>(n));
  }
}

TEST(Rag, ShippedCorpusAnswersTimingQuery) {
  const auto index = build_index(data_dir() / "corpus");
  const auto r = retrieve(index, queries({"OpenLane timing optimization CLOCK_PERIOD violation"}), 5);
  const auto ids = r.ids();
  const auto pos = std::find(ids.begin(), ids.end(), "clock_period") - ids.begin();
  EXPECT_LT(pos, 3);
}

TEST(Rag, Errors) {
  EXPECT_THROW(build_index(std::vector<DocChunk>{}), Error);
  try {
    build_index({chunk("a", "t", "b"), chunk("a", "u", "c")});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateChunkId);
  }
  const auto index = build_index({chunk("a", "t", "b")});
  const auto q = queries({"t"});
  try {
    retrieve(index, q, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PreconditionViolation);
  }
  try {
    retrieve(nullptr, q, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyIndex);
  }
}

TEST(Rag, ChunkSerializationRoundTrip) {
  auto c = chunk("fp_core_util", "FP_CORE_UTIL", "Core utilization.\n\nSecond paragraph.", 3, {"FP_CORE_UTIL"});
  c.kind = ChunkKind::parameter_doc;
  EXPECT_EQ(parse_chunk(serialize_chunk(c)), c);
  try {
    parse_chunk("no front matter");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedChunk);
  }
}

TEST(Rag, FormulatedQueriesFollowIssuesThenGoal) {
  IssueSet issues;
  issues.issues.push_back({IssueCategory::timing, Severity::critical, "sta:setup", "slack -2000", "timing"});
  FlowConfig cfg;
  cfg.design_name = "d";
  cfg.parameters = ParameterRegistry::shipped().defaults();
  const auto goal = OptimizationGoal::preset(GoalPriority::area);
  const auto qs = formulate_queries(issues, cfg, &goal);
  ASSERT_EQ(qs.size(), 4u);
  EXPECT_TRUE(qs[0].originating_issue);
  EXPECT_NE(qs[0].text.find("OpenLane"), std::string::npos);
  EXPECT_NE(qs[0].text.find("CLOCK_PERIOD"), std::string::npos);
  EXPECT_EQ(qs[1].goal_tag, "area");
}

TEST(Rag, TruncationDropsLowestScoresFirst) {
  const auto index = build_index(data_dir() / "corpus");
  const auto r = retrieve(index, queries({"timing violation clock period", "routing congestion overflow"}), 5);
  ASSERT_GE(r.entries.size(), 6u);
  FlowConfig cfg;
  cfg.design_name = "d";
  cfg.parameters = ParameterRegistry::shipped().defaults();
  RunMetrics m;
  m.area_um2 = 100;
  OptimizationHistory history;
  const auto full = assemble_prompt(m, {}, history, cfg, r, nullptr, 1000000);
  EXPECT_EQ(full.retrieved_ids, r.ids());
  EXPECT_EQ(full.total_size_chars, full.text().size());
  std::size_t prev = full.retrieved_ids.size();
  for (std::size_t budget = full.total_size_chars; budget >= 1000; budget -= 250) {
    PromptPayload p;
    try {
      p = assemble_prompt(m, {}, history, cfg, r, nullptr, budget);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::BudgetTooSmallForMandatorySections);
      EXPECT_EQ(prev, 0u);
      break;
    }
    EXPECT_LE(p.total_size_chars, budget);
    // Survivors are always a prefix of the ranked list.
    ASSERT_LE(p.retrieved_ids.size(), r.ids().size());
    EXPECT_TRUE(std::equal(p.retrieved_ids.begin(), p.retrieved_ids.end(), r.ids().begin()));
    EXPECT_LE(p.retrieved_ids.size(), prev);
    prev = p.retrieved_ids.size();
    if (budget < 1250) break;
  }
  EXPECT_THROW(assemble_prompt(m, {}, history, cfg, r, nullptr, 999), Error);
}

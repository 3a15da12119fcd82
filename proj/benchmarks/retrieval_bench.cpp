#include <benchmark/benchmark.h>

#include "flowpilot/data_dir.hpp"
#include "flowpilot/rag.hpp"

using namespace flowpilot;

namespace {

const IndexHandle& corpus() {
  static const IndexHandle index = build_index(data_dir() / "corpus");
  return index;
}

void BM_BuildIndex(benchmark::State& state) {
  const auto chunks = corpus()->chunks();
  for (auto _ : state) benchmark::DoNotOptimize(build_index(chunks));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(chunks.size()));
}
BENCHMARK(BM_BuildIndex);

void BM_Retrieve(benchmark::State& state) {
  std::vector<Query> queries;
  const char* texts[] = {"OpenLane timing optimization CLOCK_PERIOD violation", "routing congestion overflow GRT",
                         "reduce die area utilization", "power reduction synthesis strategy"};
  for (int i = 0; i < state.range(0); ++i) queries.push_back({texts[i % 4], std::nullopt, std::nullopt});
  for (auto _ : state) benchmark::DoNotOptimize(retrieve(corpus(), queries, kDefaultRetrievalDepth));
}
BENCHMARK(BM_Retrieve)->Arg(1)->Arg(4)->Arg(16);

// Synthetic corpus to show scaling with corpus size.
void BM_RetrieveSynthetic(benchmark::State& state) {
  std::vector<DocChunk> chunks;
  for (int i = 0; i < state.range(0); ++i) {
    DocChunk c;
    c.id = "c" + std::to_string(i);
    c.kind = ChunkKind::flow_doc;
    c.title = "topic " + std::to_string(i % 97) + " timing";
    c.body = "routing placement clock skew utilization " + std::to_string(i) + " congestion slack";
    c.reference_count = i % 7;
    chunks.push_back(std::move(c));
  }
  const auto index = build_index(std::move(chunks));
  const std::vector<Query> q = {{"timing slack clock topic 12", std::nullopt, std::nullopt}};
  for (auto _ : state) benchmark::DoNotOptimize(retrieve(index, q, 5));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_RetrieveSynthetic)->RangeMultiplier(4)->Range(64, 16384)->Complexity();

}  // namespace

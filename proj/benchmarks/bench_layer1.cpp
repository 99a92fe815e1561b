#include <benchmark/benchmark.h>

#include "commute/flow_cluster.hpp"
#include "oracles.hpp"

using namespace commute;

static void BM_ClusterSpatial(benchmark::State& state) {
  oracle::Gen g(1);
  const auto flows = g.flows(static_cast<std::size_t>(state.range(0)));
  const ClusterParams p;
  for (auto _ : state) benchmark::DoNotOptimize(cluster_spatial(flows, p));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ClusterSpatial)->Arg(50)->Arg(200)->Arg(800);

static void BM_TemporalSimilarity(benchmark::State& state) {
  oracle::Gen g(2);
  const auto flows = g.flows(256);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(temporal_similarity(flows[i % 256].span, flows[(i * 7 + 3) % 256].span, 30));
    ++i;
  }
}
BENCHMARK(BM_TemporalSimilarity);

static void BM_RunLayer1(benchmark::State& state) {
  oracle::Gen g(3);
  const auto flows = g.flows(static_cast<std::size_t>(state.range(0)));
  const ClusterParams p;
  for (auto _ : state) benchmark::DoNotOptimize(run_layer1(flows, 70, p));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RunLayer1)->Arg(100)->Arg(400);

BENCHMARK_MAIN();

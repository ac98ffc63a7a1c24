// Graph construction: normalized adjacency, GCN forward, edge-weight matrix.

#include <benchmark/benchmark.h>

#include "gtnp/graphs.hpp"
#include "gtnp/random.hpp"

using namespace gtnp;

static void BM_NormalizeAdjacency(benchmark::State& state) {
  int n = (int)state.range(0);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) labels[i] = i % 4;
  Tensor a = label_adjacency(labels);
  for (auto _ : state) {
    Tensor abar = normalize_adjacency(a);
    benchmark::DoNotOptimize(abar.data.data());
  }
}
BENCHMARK(BM_NormalizeAdjacency)->Arg(100)->Arg(300);

static void BM_GcnForward(benchmark::State& state) {
  int n = (int)state.range(0);
  RandomStream rng(21);
  Tensor feats = rng.normal_tensor({n, 48});
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) labels[i] = i % 4;
  Tensor abar = normalize_adjacency(label_adjacency(labels));
  GcnParams p(48, 64, 4, rng);
  for (auto _ : state) {
    Tensor u = gcn_forward(feats, abar, p);
    benchmark::DoNotOptimize(u.data.data());
  }
}
BENCHMARK(BM_GcnForward)->Arg(100)->Arg(300);

static void BM_EdgeWeightMatrix(benchmark::State& state) {
  int n = (int)state.range(0);
  RandomStream rng(22);
  Tensor nodes = rng.normal_tensor({n, 64});
  GcnParams p(48, 64, 4, rng);
  for (auto _ : state) {
    Tensor g = edge_weight_matrix(nodes, p);
    benchmark::DoNotOptimize(g.data.data());
  }
}
BENCHMARK(BM_EdgeWeightMatrix)->Arg(100)->Arg(300);

BENCHMARK_MAIN();

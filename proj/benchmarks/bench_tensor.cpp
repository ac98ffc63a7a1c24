// Core tensor kernels: plain vs compensated matmul, conv, pooling.

#include <benchmark/benchmark.h>

#include "gtnp/random.hpp"
#include "gtnp/tensor.hpp"

using namespace gtnp;

static Tensor rand_mat(int r, int c, uint64_t seed) {
  RandomStream rng(seed);
  return rng.normal_tensor({r, c});
}

static void BM_Matmul(benchmark::State& state) {
  int n = (int)state.range(0);
  Tensor a = rand_mat(n, n, 1), b = rand_mat(n, n, 2);
  for (auto _ : state) {
    Tensor c = matmul(a, b);
    benchmark::DoNotOptimize(c.data.data());
  }
  state.SetItemsProcessed(state.iterations() * (int64_t)n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

static void BM_MatmulExact(benchmark::State& state) {
  int n = (int)state.range(0);
  Tensor a = rand_mat(n, n, 1), b = rand_mat(n, n, 2);
  for (auto _ : state) {
    Tensor c = matmul_exact(a, b);
    benchmark::DoNotOptimize(c.data.data());
  }
  state.SetItemsProcessed(state.iterations() * (int64_t)n * n * n);
}
BENCHMARK(BM_MatmulExact)->Arg(64)->Arg(128)->Arg(256);

static void BM_Conv2d(benchmark::State& state) {
  int b = (int)state.range(0);
  RandomStream rng(3);
  Tensor x = rng.normal_tensor({b, 1, 16, 16});
  Tensor k = rng.normal_tensor({8, 1, 3, 3});
  Tensor bias = Tensor::zeros({8});
  for (auto _ : state) {
    Tensor y = conv2d_valid(x, k, bias);
    benchmark::DoNotOptimize(y.data.data());
  }
}
BENCHMARK(BM_Conv2d)->Arg(32)->Arg(300);

static void BM_PairwiseSqdist(benchmark::State& state) {
  int n = (int)state.range(0);
  Tensor a = rand_mat(n, 64, 4), b = rand_mat(n, 64, 5);
  for (auto _ : state) {
    Tensor d = pairwise_sqdist(a, b);
    benchmark::DoNotOptimize(d.data.data());
  }
}
BENCHMARK(BM_PairwiseSqdist)->Arg(64)->Arg(300);

BENCHMARK_MAIN();

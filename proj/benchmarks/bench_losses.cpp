// Loss kernels: domain-gap MMD and analytic KL rows.

#include <benchmark/benchmark.h>

#include "gtnp/gaussians.hpp"
#include "gtnp/losses.hpp"
#include "gtnp/random.hpp"

using namespace gtnp;

static void BM_MmdValue(benchmark::State& state) {
  int n = (int)state.range(0);
  RandomStream rng(11);
  Tensor a = rng.normal_tensor({n, 64});
  Tensor b = rng.normal_tensor({n, 64});
  MmdConfig cfg;
  for (auto _ : state) {
    double v = mmd_loss(a, b, cfg);
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(BM_MmdValue)->Arg(32)->Arg(64)->Arg(128);

static void BM_MmdRecorded(benchmark::State& state) {
  int n = (int)state.range(0);
  RandomStream rng(12);
  Tensor a = rng.normal_tensor({n, 64});
  Tensor b = rng.normal_tensor({n, 64});
  MmdConfig cfg;
  for (auto _ : state) {
    Graph g;
    Var va = g.constant(a), vb = g.constant(b);
    Var m = mmd_loss(va, vb, cfg);
    g.backward(m);
    benchmark::DoNotOptimize(m.val().data.data());
  }
}
BENCHMARK(BM_MmdRecorded)->Arg(32)->Arg(64);

static void BM_KlDiag(benchmark::State& state) {
  int n = (int)state.range(0);
  std::vector<DiagGaussian> qs(n), ps(n);
  for (int i = 0; i < n; ++i) {
    qs[i].mean.assign(64, 0.3);
    qs[i].logvar.assign(64, -0.2);
    ps[i].mean.assign(64, 0.0);
    ps[i].logvar.assign(64, 0.0);
  }
  for (auto _ : state) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += kl_diag_gaussians(qs[i], ps[i]);
    benchmark::DoNotOptimize(acc);
  }
}
BENCHMARK(BM_KlDiag)->Arg(32)->Arg(256);

BENCHMARK_MAIN();

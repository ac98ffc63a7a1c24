// End-to-end cost of a single optimization step at production shapes.

#include <benchmark/benchmark.h>

#include "gtnp/dataset.hpp"
#include "gtnp/train.hpp"

using namespace gtnp;

namespace {

struct StepFixture {
  TrainConfig cfg;
  DomainDataset source, target;
  std::unique_ptr<TrainState> state;
  DomainContext src_ctx, tgt_ctx;
  DomainBatch src_batch, tgt_batch;

  explicit StepFixture(int n_ref, int batch) {
    SynthConfig sc;
    sc.samples_per_class_source = sc.samples_per_class_target = n_ref / 2;
    sc.seed = 5;
    std::tie(source, target) = synth_generate(sc);
    normalize_fit(source);
    normalize_fit(target);

    cfg.batch_size = batch;
    cfg.n_ref = n_ref;
    cfg.epochs = 1;
    cfg.gcn_nodes = n_ref;
    cfg.gcn_epochs = 1;
    cfg.seed = 5;

    RandomStream rs = derive_stream(5, "split-source"), rt = derive_stream(5, "split-target");
    split_reference(source, n_ref, rs);
    split_reference(target, n_ref, rt);

    state = init_state(cfg, source.height, source.width, source.label_space);
    // identity-free frozen graphs straight from the untrained edge head
    auto refs = source.indices_with(SetTag::Reference);
    std::vector<const Tensor*> mats;
    std::vector<int> labels;
    for (int i : refs) {
      mats.push_back(&source.samples[i].matrix);
      labels.push_back(source.samples[i].label);
    }
    Tensor feats = state->extractor.infer(stack_batch(mats));
    Tensor abar = normalize_adjacency(label_adjacency(labels));
    Tensor reps = gcn_forward(feats, abar, state->gcn);
    state->g_source = edge_weight_matrix(reps, state->gcn);
    state->g_target = state->g_source;
    state->opt = std::make_unique<Optimizer>(cfg.optimizer, cfg.learning_rate,
                                             state->params());

    src_ctx = make_context(source, state->g_source, source.label_space, true);
    tgt_ctx = make_context(target, state->g_target, target.label_space, true);
    src_batch = make_batch(source, batch);
    tgt_batch = make_batch(target, batch);
  }

  DomainBatch make_batch(const DomainDataset& ds, int batch) {
    DomainBatch b;
    auto refs = ds.indices_with(SetTag::Reference);
    auto mods = ds.indices_with(SetTag::Modeling);
    std::vector<const Tensor*> mats;
    for (int k = 0; k < batch; ++k) {
      int i = (k % 2 == 0 && k / 2 < (int)refs.size()) ? refs[k / 2] : mods[k % mods.size()];
      mats.push_back(&ds.samples[i].matrix);
      b.labels.push_back(ds.samples[i].label);
      if (k % 2 == 0 && k / 2 < (int)refs.size())
        b.ref_members.push_back({k, k / 2});
      else
        b.mod_positions.push_back(k);
    }
    b.x = stack_batch(mats);
    return b;
  }
};

}  // namespace

static void BM_TrainStep(benchmark::State& state) {
  StepFixture f((int)state.range(0), (int)state.range(1));
  for (auto _ : state) {
    LossBreakdown b = train_step(*f.state, f.src_ctx, f.src_batch, f.tgt_ctx,
                                 f.tgt_batch, f.cfg);
    benchmark::DoNotOptimize(b.total);
  }
}
BENCHMARK(BM_TrainStep)->Args({60, 16})->Args({300, 32})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

// Training orchestration: state construction, graph pretraining and freezing,
// per-step loss assembly over paired batches, the epoch loop, checkpoint
// round-trips, and deterministic inference.

#include "gtnp/train.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>

#include "gtnp/errors.hpp"

namespace gtnp {

void TrainConfig::validate() const {
  if (batch_size < 2) throw config_error("batch_size must be at least 2");
  if (!(learning_rate > 0.0)) throw config_error("learning_rate must be positive");
  if (epochs < 0) throw config_error("epochs must be non-negative");
  if (n_ref < 1) throw config_error("n_ref must be at least 1");
  if (gcn_nodes < 2) throw config_error("gcn_nodes must be at least 2");
  if (gcn_epochs < 0) throw config_error("gcn_epochs must be non-negative");
  if (!(gcn_lr > 0.0)) throw config_error("gcn_lr must be positive");
  if (dims.d_f < 1 || dims.d_g < 1 || dims.d_u < 1 || dims.d_z < 1 ||
      dims.msg_hidden < 1 || dims.gcn_hidden < 1)
    throw config_error("model dimensions must be positive");
}

// ------------------------------ state ------------------------------------

std::vector<Parameter*> TrainState::params() {
  std::vector<Parameter*> out;
  for (Parameter* p : extractor.params()) out.push_back(p);
  for (Parameter* p : global.params()) out.push_back(p);
  for (Parameter* p : embed.params()) out.push_back(p);
  out.push_back(&log_tau);
  for (Parameter* p : real.params()) out.push_back(p);
  for (Parameter* p : est.params()) out.push_back(p);
  for (Parameter* p : classifier.params()) out.push_back(p);
  return out;
}

std::unique_ptr<TrainState> init_state(const TrainConfig& cfg, int in_h, int in_w,
                                       int label_space) {
  auto s = std::make_unique<TrainState>();
  s->dims = cfg.dims;
  s->label_space = label_space;
  s->in_h = in_h;
  s->in_w = in_w;
  RandomStream r_ext = derive_stream(cfg.seed, "init-extractor");
  s->extractor = FeatureExtractor(in_h, in_w, cfg.dims.d_f, r_ext);
  s->global = GlobalLatent(cfg.dims.d_g);
  RandomStream r_emb = derive_stream(cfg.seed, "init-embedding");
  s->embed = EmbeddingHead(cfg.dims.d_f + cfg.dims.d_g, cfg.dims.d_u, r_emb);
  s->log_tau = Parameter("graphs.log_tau", Tensor::zeros({1, 1}));
  RandomStream r_real = derive_stream(cfg.seed, "init-real");
  s->real = RealDistHead(cfg.dims.d_u, label_space, cfg.dims.msg_hidden, cfg.dims.d_z,
                         r_real);
  RandomStream r_est = derive_stream(cfg.seed, "init-estimated");
  s->est = EstDistHead(cfg.dims.d_u, cfg.dims.d_z, r_est);
  RandomStream r_cls = derive_stream(cfg.seed, "init-classifier");
  s->classifier = ClassifierHead(cfg.dims.d_z, cfg.dims.d_u, label_space, r_cls);
  s->rng = derive_stream(cfg.seed, "train-noise");
  return s;
}

// Fixed parameter enumeration shared by save and load.
static std::vector<const Parameter*> all_params_const(const TrainState& s) {
  TrainState& m = const_cast<TrainState&>(s);  // enumeration only, no mutation
  std::vector<const Parameter*> out;
  for (Parameter* p : m.params()) out.push_back(p);
  for (Parameter* p : m.gcn.params()) out.push_back(p);
  return out;
}

TensorArchive TrainState::to_archive() const {
  TensorArchive ar;
  for (const Parameter* p : all_params_const(*this)) ar.add(p->name, p->value);
  ar.add("graphs.g_source", g_source);
  ar.add("graphs.g_target", g_target);
  ar.meta_int["label_space"] = label_space;
  ar.meta_int["in_h"] = in_h;
  ar.meta_int["in_w"] = in_w;
  ar.meta_int["epoch"] = epoch;
  ar.meta_int["d_f"] = dims.d_f;
  ar.meta_int["d_g"] = dims.d_g;
  ar.meta_int["d_u"] = dims.d_u;
  ar.meta_int["d_z"] = dims.d_z;
  ar.meta_int["msg_hidden"] = dims.msg_hidden;
  ar.meta_int["gcn_hidden"] = dims.gcn_hidden;
  auto st = rng.state();
  for (int i = 0; i < 4; ++i)
    ar.meta_int["rng_state_" + std::to_string(i)] =
        std::bit_cast<long long>(st[static_cast<size_t>(i)]);
  return ar;
}

std::unique_ptr<TrainState> state_from_archive(const TensorArchive& ar) {
  auto need = [&](const std::string& k) {
    auto it = ar.meta_int.find(k);
    if (it == ar.meta_int.end()) throw data_error("checkpoint missing meta field " + k);
    return it->second;
  };
  TrainConfig cfg;
  cfg.dims.d_f = static_cast<int>(need("d_f"));
  cfg.dims.d_g = static_cast<int>(need("d_g"));
  cfg.dims.d_u = static_cast<int>(need("d_u"));
  cfg.dims.d_z = static_cast<int>(need("d_z"));
  cfg.dims.msg_hidden = static_cast<int>(need("msg_hidden"));
  cfg.dims.gcn_hidden = static_cast<int>(need("gcn_hidden"));
  auto s = init_state(cfg, static_cast<int>(need("in_h")), static_cast<int>(need("in_w")),
                      static_cast<int>(need("label_space")));
  RandomStream dummy(0);
  s->gcn = GcnParams(cfg.dims.d_f, cfg.dims.gcn_hidden, s->label_space, dummy);

  for (Parameter* p : s->params()) {
    const Tensor& t = ar.get(p->name);
    if (!t.same_shape(p->value))
      throw data_error("checkpoint shape mismatch for " + p->name);
    p->value = t;
    p->grad = Tensor::zeros(t.shape);
  }
  for (Parameter* p : s->gcn.params()) {
    const Tensor& t = ar.get(p->name);
    if (!t.same_shape(p->value))
      throw data_error("checkpoint shape mismatch for " + p->name);
    p->value = t;
    p->grad = Tensor::zeros(t.shape);
  }
  s->g_source = ar.get("graphs.g_source");
  s->g_target = ar.get("graphs.g_target");
  s->epoch = static_cast<int>(need("epoch"));
  std::array<uint64_t, 4> st;
  for (int i = 0; i < 4; ++i)
    st[static_cast<size_t>(i)] =
        std::bit_cast<uint64_t>(need("rng_state_" + std::to_string(i)));
  s->rng.set_state(st);
  return s;
}

// --------------------------- loss assembly --------------------------------

NoiseBundle draw_noise(RandomStream& rng, int b_source, int b_target,
                       const ModelDims& dims) {
  NoiseBundle n;
  n.eps_global = rng.normal_tensor({1, dims.d_g});
  n.eps_u_source = rng.normal_tensor({b_source, dims.d_u});
  n.eps_u_target = rng.normal_tensor({b_target, dims.d_u});
  n.eps_z_source = rng.normal_tensor({b_source, dims.d_z});
  n.eps_z_target = rng.normal_tensor({b_target, dims.d_z});
  return n;
}

namespace {

struct DomainSide {
  Var dist;       // mean KL(q || p) over the batch
  Var cls;        // CE, or a zero constant in label-free mode
  Var u_sampled;  // (B, d_u)
};

DomainSide domain_terms(Graph& g, TrainState& s, const DomainContext& ctx,
                        const DomainBatch& batch, Var zg, Var tau_var,
                        const Tensor& eps_u, const Tensor& eps_z,
                        const char* domain_name) {
  int b = batch.x.dim(0);
  int n_r = ctx.ref_x.dim(0);
  if (static_cast<int>(batch.ref_members.size() + batch.mod_positions.size()) != b)
    throw shape_error("batch membership does not cover the batch");

  // Reference anchors at the mean of p(u | h).
  Var feats_r = s.extractor.forward(g, g.constant(ctx.ref_x));
  Var u_r = s.embed.forward(g, augment_with_global(feats_r, zg)).first;
  Var msgs = s.real.messages(g, u_r, ctx.onehot);

  // Batch embeddings, sampled.
  Var feats_b = s.extractor.forward(g, g.constant(batch.x));
  auto [mu_u, lv_u] = s.embed.forward(g, augment_with_global(feats_b, zg));
  Var u_b = gaussian_sample(mu_u, lv_u, eps_u);

  // Conditioning weights, row-stochastic by construction: frozen graph rows
  // for reference members (self excluded, normalized directly since the graph
  // is constant), softmax over kernel logits for modeling members. The
  // softmax form equals normalized exp(-tau/2 d^2) but survives large
  // distances without underflow.
  Var weights;
  bool have = false;
  if (!batch.ref_members.empty()) {
    int k = static_cast<int>(batch.ref_members.size());
    Tensor rows({k, n_r});
    std::vector<int> positions(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) {
      auto [pos, r] = batch.ref_members[static_cast<size_t>(i)];
      if (r < 0 || r >= n_r) throw data_error("reference row out of range");
      double sum = 0.0;
      for (int j = 0; j < n_r; ++j) {
        rows.at(i, j) = ctx.g_frozen->at(r, j);
        if (j != r) sum += rows.at(i, j);
      }
      rows.at(i, r) = 0.0;
      if (!(sum > 1e-300)) {
        warn(std::string(domain_name) +
             " conditioning: reference row " + std::to_string(r) +
             " has no usable neighbors, falling back to uniform weights");
        for (int j = 0; j < n_r; ++j)
          rows.at(i, j) = (j == r || n_r < 2) ? 0.0 : 1.0 / (n_r - 1);
      } else {
        for (int j = 0; j < n_r; ++j) rows.at(i, j) /= sum;
      }
      positions[static_cast<size_t>(i)] = pos;
    }
    weights = scatter_rows(g.constant(rows), positions, b);
    have = true;
  }
  if (!batch.mod_positions.empty()) {
    Var u_m = gather_rows(u_b, batch.mod_positions);
    Var wn = softmax(scale_by(pairwise_sqdist(u_m, u_r), tau_var, -0.5));
    Var scattered = scatter_rows(wn, batch.mod_positions, b);
    weights = have ? add(weights, scattered) : scattered;
    have = true;
  }

  auto [mu_p, lv_p] = s.real.output(g, matmul(weights, msgs));
  auto [mu_q, lv_q] = s.est.forward(g, u_b);

  DomainSide side;
  side.dist = mean_all(kl_rows(mu_q, lv_q, mu_p, lv_p));
  side.u_sampled = u_b;
  if (ctx.use_labels) {
    Var z_b = gaussian_sample(mu_q, lv_q, eps_z);
    side.cls = ce_loss(softmax(s.classifier.logits(g, z_b, u_b)), batch.labels);
  } else {
    side.cls = g.constant(Tensor::zeros({1, 1}));
  }
  return side;
}

}  // namespace

StepTerms assemble_loss(Graph& g, TrainState& s, const DomainContext& src_ctx,
                        const DomainBatch& src, const DomainContext& tgt_ctx,
                        const DomainBatch& tgt, const NoiseBundle& noise,
                        const TrainConfig& cfg) {
  Var zg = gaussian_sample(g.param(s.global.mean), g.param(s.global.logvar),
                           noise.eps_global);
  Var tau_var = expv(g.param(s.log_tau));

  DomainSide a = domain_terms(g, s, src_ctx, src, zg, tau_var, noise.eps_u_source,
                              noise.eps_z_source, "source");
  DomainSide t = domain_terms(g, s, tgt_ctx, tgt, zg, tau_var, noise.eps_u_target,
                              noise.eps_z_target, "target");

  StepTerms out;
  out.dist_source = a.dist;
  out.dist_target = t.dist;
  out.cls_source = a.cls;
  out.cls_target = t.cls;
  out.mmd = mmd_loss(a.u_sampled, t.u_sampled, cfg.mmd);
  int d_g = s.dims.d_g;
  out.global_kl = kl_rows(g.param(s.global.mean), g.param(s.global.logvar),
                          g.constant(Tensor::zeros({1, d_g})),
                          g.constant(Tensor::zeros({1, d_g})));
  // Validates finiteness term by term before any backward pass.
  out.breakdown = total_loss(out.dist_source.scalar(), out.dist_target.scalar(),
                             out.cls_source.scalar(), out.cls_target.scalar(),
                             out.mmd.scalar(), out.global_kl.scalar(), cfg.weights);
  out.total = combine({out.dist_source, out.dist_target, out.cls_source, out.cls_target,
                       out.mmd, out.global_kl},
                      {1.0, 1.0, 1.0, 1.0, cfg.weights.lambda_mmd, cfg.weights.amplitude});
  return out;
}

LossBreakdown train_step(TrainState& s, const DomainContext& src_ctx,
                         const DomainBatch& src, const DomainContext& tgt_ctx,
                         const DomainBatch& tgt, const TrainConfig& cfg) {
  auto rng_snapshot = s.rng.state();
  try {
    NoiseBundle noise = draw_noise(s.rng, src.x.dim(0), tgt.x.dim(0), s.dims);
    Graph g;
    StepTerms terms = assemble_loss(g, s, src_ctx, src, tgt_ctx, tgt, noise, cfg);
    g.backward(terms.total);
    s.opt->step();
    return terms.breakdown;
  } catch (...) {
    s.rng.set_state(rng_snapshot);  // aborted steps leave the state untouched
    for (Parameter* p : s.params()) p->zero_grad();
    throw;
  }
}

// ------------------------------- fit --------------------------------------

DomainContext make_context(const DomainDataset& ds, const Tensor& g_frozen,
                           int label_space, bool use_labels) {
  std::vector<int> refs = ds.indices_with(SetTag::Reference);
  if (refs.empty()) throw data_error("make_context: dataset has no reference set");
  DomainContext ctx;
  std::vector<const Tensor*> mats;
  mats.reserve(refs.size());
  for (int i : refs) {
    mats.push_back(&ds.samples[static_cast<size_t>(i)].matrix);
    ctx.ref_labels.push_back(ds.samples[static_cast<size_t>(i)].label);
  }
  ctx.ref_x = stack_batch(mats);
  ctx.onehot = use_labels ? one_hot(ctx.ref_labels, label_space)
                          : Tensor::zeros({static_cast<int>(refs.size()), label_space});
  ctx.g_frozen = &g_frozen;
  ctx.use_labels = use_labels;
  if (g_frozen.dim(0) != static_cast<int>(refs.size()))
    throw shape_error("frozen graph size does not match the reference set");
  return ctx;
}

namespace {

// Endless shuffled pass over fixed indices; reshuffles on wrap.
struct BatchCycler {
  std::vector<int> order;
  size_t pos = 0;
  RandomStream rng;

  BatchCycler(std::vector<int> idx, RandomStream r) : order(std::move(idx)), rng(r) {
    rng.shuffle(order);
  }
  std::vector<int> take(int b) {
    std::vector<int> out;
    out.reserve(static_cast<size_t>(b));
    for (int i = 0; i < b; ++i) {
      if (pos == order.size()) {
        rng.shuffle(order);
        pos = 0;
      }
      out.push_back(order[pos++]);
    }
    return out;
  }
};

DomainBatch make_batch(const DomainDataset& ds, const std::vector<int>& idx,
                       const std::vector<int>& ref_row_of) {
  DomainBatch b;
  std::vector<const Tensor*> mats;
  mats.reserve(idx.size());
  for (size_t k = 0; k < idx.size(); ++k) {
    const LabeledSample& smp = ds.samples[static_cast<size_t>(idx[k])];
    mats.push_back(&smp.matrix);
    b.labels.push_back(smp.label);
    int r = ref_row_of[static_cast<size_t>(idx[k])];
    if (r >= 0)
      b.ref_members.emplace_back(static_cast<int>(k), r);
    else
      b.mod_positions.push_back(static_cast<int>(k));
  }
  b.x = stack_batch(mats);
  return b;
}

std::vector<int> train_indices(const DomainDataset& ds) {
  std::vector<int> out;
  for (size_t i = 0; i < ds.samples.size(); ++i)
    if (ds.samples[i].set != SetTag::Test) out.push_back(static_cast<int>(i));
  return out;
}

Tensor extract_features(const TrainState& s, const DomainDataset& ds,
                        const std::vector<int>& idx) {
  std::vector<const Tensor*> mats;
  mats.reserve(idx.size());
  for (int i : idx) mats.push_back(&ds.samples[static_cast<size_t>(i)].matrix);
  return s.extractor.infer(stack_batch(mats));
}

Tensor frozen_reference_graph(const TrainState& s, const DomainDataset& ds,
                              bool use_labels) {
  std::vector<int> refs = ds.indices_with(SetTag::Reference);
  Tensor feats = extract_features(s, ds, refs);
  Tensor adjacency;
  if (use_labels) {
    std::vector<int> labels;
    for (int i : refs) labels.push_back(ds.samples[static_cast<size_t>(i)].label);
    adjacency = label_adjacency(labels);
  } else {
    int n = static_cast<int>(refs.size());
    adjacency = Tensor::zeros({n, n});
    for (int i = 0; i < n; ++i) adjacency.at(i, i) = 1.0;
  }
  Tensor reps = gcn_forward(feats, adjacency, s.gcn);
  return edge_weight_matrix(reps, s.gcn);
}

double mean_of(const Tensor& t) {
  return exact_sum(t.data.data(), static_cast<int64_t>(t.data.size())) /
         static_cast<double>(t.data.size());
}

double mean_exp_of(const Tensor& t) {
  std::vector<double> e(t.data.size());
  for (size_t i = 0; i < e.size(); ++i) e[i] = std::exp(t.data[i]);
  return exact_sum(e.data(), static_cast<int64_t>(e.size())) /
         static_cast<double>(e.size());
}

}  // namespace

FitResult fit(const TrainConfig& cfg, DomainDataset& source, DomainDataset& target) {
  cfg.validate();
  source.validate();
  target.validate();
  if (source.height != target.height || source.width != target.width)
    throw shape_error("fit: domains disagree on sample shape");
  if (source.label_space != target.label_space)
    throw data_error("fit: domains disagree on label space");
  if (!source.norm.has_value() || !target.norm.has_value())
    warn("fit: training on unnormalized data");
  int label_space = source.label_space;

  // Class coverage: a class may be target-only (emerging fault) but must
  // exist somewhere.
  {
    std::vector<char> in_s(static_cast<size_t>(label_space), 0),
        in_t(static_cast<size_t>(label_space), 0);
    for (int i : train_indices(source)) in_s[static_cast<size_t>(source.samples[static_cast<size_t>(i)].label)] = 1;
    for (int i : train_indices(target)) in_t[static_cast<size_t>(target.samples[static_cast<size_t>(i)].label)] = 1;
    for (int c = 0; c < label_space; ++c) {
      if (!in_s[static_cast<size_t>(c)] && !in_t[static_cast<size_t>(c)])
        throw data_error("fit: class " + std::to_string(c) +
                         " absent from both training sets");
      if (!in_s[static_cast<size_t>(c)] && in_t[static_cast<size_t>(c)])
        info("fit: class " + std::to_string(c) +
             " present only in the target domain (emerging-fault mode)");
    }
  }

  RandomStream split_s = derive_stream(cfg.seed, "split-source");
  split_reference(source, cfg.resolved_n_ref_source(), split_s);
  RandomStream split_t = derive_stream(cfg.seed, "split-target");
  split_reference(target, cfg.n_ref, split_t);

  auto state = init_state(cfg, source.height, source.width, label_space);
  FitResult res;
  res.initial_global_var = mean_exp_of(state->global.logvar.value);

  // Graph pretraining nodes: reuse the source reference set when its size
  // matches, otherwise a fresh random subset of the source training data.
  std::vector<int> src_refs = source.indices_with(SetTag::Reference);
  std::vector<int> src_train = train_indices(source);
  int gcn_count = std::min(cfg.gcn_nodes, static_cast<int>(src_train.size()));
  std::vector<int> gcn_idx;
  res.gcn_reused_reference = static_cast<int>(src_refs.size()) == gcn_count;
  if (res.gcn_reused_reference) {
    gcn_idx = src_refs;
    info("fit: graph pretraining reuses the source reference set (" +
         std::to_string(gcn_count) + " nodes)");
  } else {
    RandomStream sub = derive_stream(cfg.seed, "gcn-subset");
    std::vector<int> pool = src_train;
    sub.shuffle(pool);
    gcn_idx.assign(pool.begin(), pool.begin() + gcn_count);
    std::sort(gcn_idx.begin(), gcn_idx.end());
    info("fit: graph pretraining uses a fresh subset of " + std::to_string(gcn_count) +
         " source training samples");
  }
  {
    Tensor feats = extract_features(*state, source, gcn_idx);
    std::vector<int> labels;
    for (int i : gcn_idx) labels.push_back(source.samples[static_cast<size_t>(i)].label);
    PretrainResult pre =
        pretrain_gcn(feats, labels, label_space, cfg.dims.gcn_hidden,
                     cfg.untrained_graph ? 0 : cfg.gcn_epochs, cfg.gcn_lr,
                     cfg.gcn_optimizer, cfg.seed);
    state->gcn = std::move(pre.params);
    res.gcn_trace = std::move(pre.trace);
  }
  state->g_source = frozen_reference_graph(*state, source, true);
  state->g_target = frozen_reference_graph(*state, target, cfg.use_target_labels);

  DomainContext ctx_s = make_context(source, state->g_source, label_space, true);
  DomainContext ctx_t =
      make_context(target, state->g_target, label_space, cfg.use_target_labels);

  state->opt =
      std::make_unique<Optimizer>(cfg.optimizer, cfg.learning_rate, state->params());

  // Dataset index -> reference row (or -1).
  auto ref_rows = [](const DomainDataset& ds) {
    std::vector<int> map(ds.samples.size(), -1);
    std::vector<int> refs = ds.indices_with(SetTag::Reference);
    for (size_t r = 0; r < refs.size(); ++r)
      map[static_cast<size_t>(refs[r])] = static_cast<int>(r);
    return map;
  };
  std::vector<int> ref_row_s = ref_rows(source), ref_row_t = ref_rows(target);

  std::vector<int> idx_s = train_indices(source), idx_t = train_indices(target);
  BatchCycler cyc_s(idx_s, derive_stream(cfg.seed, "batch-source"));
  BatchCycler cyc_t(idx_t, derive_stream(cfg.seed, "batch-target"));
  int largest = std::max(static_cast<int>(idx_s.size()), static_cast<int>(idx_t.size()));
  int steps_per_epoch = (largest + cfg.batch_size - 1) / cfg.batch_size;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double sum_kl = 0.0;
    LossBreakdown acc;
    for (int step = 0; step < steps_per_epoch; ++step) {
      DomainBatch bs = make_batch(source, cyc_s.take(cfg.batch_size), ref_row_s);
      DomainBatch bt = make_batch(target, cyc_t.take(cfg.batch_size), ref_row_t);
      LossBreakdown lb = train_step(*state, ctx_s, bs, ctx_t, bt, cfg);

      StepRecord rec;
      rec.epoch = epoch;
      rec.step = step;
      rec.loss = lb;
      int n_s = bs.x.dim(0), n_t = bt.x.dim(0);
      rec.kl_qp_mean = (lb.dist_source * n_s + lb.dist_target * n_t) / (n_s + n_t);
      rec.global_mean_avg = mean_of(state->global.mean.value);
      rec.global_var_avg = mean_exp_of(state->global.logvar.value);
      res.steps.push_back(rec);

      sum_kl += rec.kl_qp_mean;
      acc.dist_source += lb.dist_source;
      acc.dist_target += lb.dist_target;
      acc.cls_source += lb.cls_source;
      acc.cls_target += lb.cls_target;
      acc.mmd += lb.mmd;
      acc.global_kl += lb.global_kl;
      acc.total += lb.total;
    }
    EpochRecord er;
    er.epoch = epoch;
    double inv = 1.0 / steps_per_epoch;
    er.mean_loss.dist_source = acc.dist_source * inv;
    er.mean_loss.dist_target = acc.dist_target * inv;
    er.mean_loss.cls_source = acc.cls_source * inv;
    er.mean_loss.cls_target = acc.cls_target * inv;
    er.mean_loss.mmd = acc.mmd * inv;
    er.mean_loss.global_kl = acc.global_kl * inv;
    er.mean_loss.total = acc.total * inv;
    er.mean_loss.weights = cfg.weights;
    er.kl_qp_mean = sum_kl * inv;
    er.global_mean_avg = mean_of(state->global.mean.value);
    er.global_var_avg = mean_exp_of(state->global.logvar.value);
    res.epochs.push_back(er);
    state->epoch = epoch + 1;
  }

  res.state = std::move(state);
  return res;
}

// ----------------------------- inference ----------------------------------

Tensor predict_probabilities(const TrainState& s, const Tensor& x4) {
  if (x4.ndim() != 4 || x4.dim(2) != s.in_h || x4.dim(3) != s.in_w)
    throw shape_error("predict: input shape mismatch");
  Tensor feats = s.extractor.infer(x4);
  Tensor h = augment_with_global(feats, s.global.mean.value);
  Tensor u = s.embed.infer(h).first;        // mean of p(u | h)
  Tensor z = s.est.infer(u).first;          // mean of q(z | u)
  return s.classifier.probabilities(z, u);
}

std::pair<int, std::vector<double>> predict(const TrainState& s, const Tensor& x) {
  if (x.ndim() != 2 || x.dim(0) != s.in_h || x.dim(1) != s.in_w)
    throw shape_error("predict: sample shape mismatch");
  Tensor x4({1, 1, s.in_h, s.in_w});
  std::copy(x.data.begin(), x.data.end(), x4.data.begin());
  Tensor probs = predict_probabilities(s, x4);
  int best = 0;
  for (int c = 1; c < probs.dim(1); ++c)
    if (probs.at(0, c) > probs.at(0, best)) best = c;
  return {best, probs.data};
}

}  // namespace gtnp

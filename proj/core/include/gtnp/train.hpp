#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gtnp/checkpoint.hpp"
#include "gtnp/dataset.hpp"
#include "gtnp/embedding.hpp"
#include "gtnp/graphs.hpp"
#include "gtnp/latent.hpp"
#include "gtnp/losses.hpp"
#include "gtnp/optim.hpp"

namespace gtnp {

struct TrainConfig {
  int batch_size = 32;
  double learning_rate = 0.01;
  OptMethod optimizer = OptMethod::RMSprop;
  int epochs = 30;
  int n_ref = 600;        // target reference-set size
  int n_ref_source = -1;  // -1 mirrors n_ref
  unsigned long long seed = 0;
  LossWeights weights;
  MmdConfig mmd;
  ModelDims dims;

  // graph pretraining protocol
  int gcn_nodes = 300;
  int gcn_epochs = 100;
  double gcn_lr = 0.01;
  OptMethod gcn_optimizer = OptMethod::RMSprop;

  // ablations
  bool use_target_labels = true;  // off: no target CE, label-free target graph
  bool untrained_graph = false;   // off-the-shelf edge head, no pretraining

  int resolved_n_ref_source() const { return n_ref_source >= 0 ? n_ref_source : n_ref; }
  void validate() const;
};

// Everything a training run owns: model parameter groups, the frozen
// dependency graphs, optimizer state, and the noise stream. Pinned in
// memory (non-copyable) because the optimizer holds parameter pointers.
struct TrainState {
  ModelDims dims;
  int label_space = 0;
  int in_h = 0, in_w = 0;

  FeatureExtractor extractor;
  GlobalLatent global;
  EmbeddingHead embed;
  GcnParams gcn;
  Parameter log_tau;  // bipartite bandwidth, tau = exp(log_tau)
  RealDistHead real;
  EstDistHead est;
  ClassifierHead classifier;

  Tensor g_source, g_target;  // frozen reference graphs
  std::unique_ptr<Optimizer> opt;
  RandomStream rng{0};
  int epoch = 0;

  TrainState() = default;
  TrainState(const TrainState&) = delete;
  TrainState& operator=(const TrainState&) = delete;

  std::vector<Parameter*> params();  // parameters the main optimizer updates
  double tau() const { return std::exp(log_tau.value.data[0]); }

  TensorArchive to_archive() const;
};

// Builds an initialized state (no optimizer, no graphs yet).
std::unique_ptr<TrainState> init_state(const TrainConfig& cfg, int in_h, int in_w,
                                       int label_space);
std::unique_ptr<TrainState> state_from_archive(const TensorArchive& ar);

// Per-domain constants for loss assembly.
struct DomainContext {
  Tensor ref_x;                 // (n_R, 1, H, W)
  std::vector<int> ref_labels;  // reference labels in row order
  Tensor onehot;                // (n_R, classes); all-zero in label-free mode
  const Tensor* g_frozen = nullptr;  // n_R x n_R reference graph
  bool use_labels = true;
};

struct DomainBatch {
  Tensor x;                 // (B, 1, H, W)
  std::vector<int> labels;  // one per row
  // batch rows that are reference samples, as (batch_pos, ref_row)
  std::vector<std::pair<int, int>> ref_members;
  std::vector<int> mod_positions;  // batch rows conditioned via the bipartite graph
};

// Injectable reparameterization noise so gradient checks can hold it fixed.
struct NoiseBundle {
  Tensor eps_global;                   // (1, d_g)
  Tensor eps_u_source, eps_u_target;   // (B, d_u)
  Tensor eps_z_source, eps_z_target;   // (B, d_z)
};
NoiseBundle draw_noise(RandomStream& rng, int b_source, int b_target,
                       const ModelDims& dims);

struct StepTerms {
  Var dist_source, dist_target, cls_source, cls_target, mmd, global_kl, total;
  LossBreakdown breakdown;
};

// Records the full per-step objective on `g`. Shared global sample, per-domain
// embedding, graph-conditioned p, amortized q, classification, MMD on the
// sampled embeddings, and the weighted total.
StepTerms assemble_loss(Graph& g, TrainState& s, const DomainContext& src_ctx,
                        const DomainBatch& src, const DomainContext& tgt_ctx,
                        const DomainBatch& tgt, const NoiseBundle& noise,
                        const TrainConfig& cfg);

// One optimization step; a non-finite loss aborts before any update.
LossBreakdown train_step(TrainState& s, const DomainContext& src_ctx,
                         const DomainBatch& src, const DomainContext& tgt_ctx,
                         const DomainBatch& tgt, const TrainConfig& cfg);

struct StepRecord {
  int epoch = 0, step = 0;
  LossBreakdown loss;
  double kl_qp_mean = 0.0;  // sample-weighted over both batches
  double global_mean_avg = 0.0, global_var_avg = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  LossBreakdown mean_loss;
  double kl_qp_mean = 0.0;                            // mean over the epoch
  double global_mean_avg = 0.0, global_var_avg = 0.0; // at epoch end
};

struct FitResult {
  std::unique_ptr<TrainState> state;
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  std::vector<GcnTraceRow> gcn_trace;
  bool gcn_reused_reference = false;
  double initial_global_var = 1.0;
};

// Full training: reference/modeling split of both domains (tags are written
// into the datasets), graph pretraining on the source side, frozen reference
// graphs, then paired-batch optimization.
FitResult fit(const TrainConfig& cfg, DomainDataset& source, DomainDataset& target);

// Builds the per-domain context from a split dataset and a frozen graph.
DomainContext make_context(const DomainDataset& ds, const Tensor& g_frozen,
                           int label_space, bool use_labels);

// Deterministic inference: u and z taken at their distribution means.
Tensor predict_probabilities(const TrainState& s, const Tensor& x4);
std::pair<int, std::vector<double>> predict(const TrainState& s, const Tensor& x);

}  // namespace gtnp

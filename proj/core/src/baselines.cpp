// Source-only and MMD-only comparison models sharing the main extractor.

#include "gtnp/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "gtnp/errors.hpp"

namespace gtnp {

void BaselineConfig::validate() const {
  if (batch_size < 2) throw config_error("baseline batch_size must be at least 2");
  if (!(learning_rate > 0.0)) throw config_error("baseline learning_rate must be positive");
  if (epochs < 0) throw config_error("baseline epochs must be non-negative");
}

std::string baseline_variant_name(BaselineConfig::Variant v) {
  return v == BaselineConfig::Variant::SourceOnly ? "source_only" : "mmd_only";
}

BaselineConfig::Variant baseline_variant_from_string(const std::string& s) {
  if (s == "source_only") return BaselineConfig::Variant::SourceOnly;
  if (s == "mmd_only") return BaselineConfig::Variant::MmdOnly;
  throw config_error("unknown baseline variant: " + s);
}

Tensor BaselineModel::predict_probabilities(const Tensor& x4) const {
  // Same output-head convention as the main model (see kOutputScale).
  return softmax_rows(scale(linear(extractor.infer(x4), w.value, b.value), kOutputScale));
}

std::vector<Parameter*> BaselineModel::params() {
  std::vector<Parameter*> out = extractor.params();
  out.push_back(&w);
  out.push_back(&b);
  return out;
}

namespace {

struct Cycler {
  std::vector<int> order;
  size_t pos = 0;
  RandomStream rng;
  Cycler(std::vector<int> idx, RandomStream r) : order(std::move(idx)), rng(r) {
    rng.shuffle(order);
  }
  std::vector<int> take(int b) {
    std::vector<int> out;
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

std::vector<int> train_indices(const DomainDataset& ds) {
  std::vector<int> out;
  for (size_t i = 0; i < ds.samples.size(); ++i)
    if (ds.samples[i].set != SetTag::Test) out.push_back(static_cast<int>(i));
  return out;
}

Tensor stack_by_index(const DomainDataset& ds, const std::vector<int>& idx) {
  std::vector<const Tensor*> mats;
  for (int i : idx) mats.push_back(&ds.samples[static_cast<size_t>(i)].matrix);
  return stack_batch(mats);
}

}  // namespace

BaselineResult train_baseline(const BaselineConfig& cfg, const DomainDataset& source,
                              const DomainDataset& target) {
  cfg.validate();
  source.validate();
  bool with_mmd = cfg.variant == BaselineConfig::Variant::MmdOnly;
  if (with_mmd) target.validate();

  auto model = std::make_unique<BaselineModel>();
  RandomStream r_init = derive_stream(cfg.seed, "baseline-init");
  model->extractor = FeatureExtractor(source.height, source.width, cfg.dims.d_f, r_init);
  model->w = Parameter("baseline.head.weight",
                       init_dense(r_init, cfg.dims.d_f, source.label_space));
  model->b = Parameter("baseline.head.bias", Tensor::zeros({source.label_space}));
  model->label_space = source.label_space;
  model->in_h = source.height;
  model->in_w = source.width;

  Optimizer opt(cfg.optimizer, cfg.learning_rate, model->params());
  std::vector<int> idx_s = train_indices(source);
  if (idx_s.empty()) throw data_error("baseline: empty source training set");
  Cycler cyc_s(idx_s, derive_stream(cfg.seed, "baseline-batch-source"));
  std::vector<int> idx_t;
  std::unique_ptr<Cycler> cyc_t;
  int largest = static_cast<int>(idx_s.size());
  if (with_mmd) {
    idx_t = train_indices(target);
    if (idx_t.empty()) throw data_error("baseline: empty target training set");
    cyc_t = std::make_unique<Cycler>(idx_t, derive_stream(cfg.seed, "baseline-batch-target"));
    largest = std::max(largest, static_cast<int>(idx_t.size()));
  }
  int steps_per_epoch = (largest + cfg.batch_size - 1) / cfg.batch_size;

  BaselineResult res;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double acc_loss = 0.0;
    for (int step = 0; step < steps_per_epoch; ++step) {
      std::vector<int> bs = cyc_s.take(cfg.batch_size);
      std::vector<int> labels;
      for (int i : bs) labels.push_back(source.samples[static_cast<size_t>(i)].label);

      Graph g;
      Var feats = model->extractor.forward(g, g.constant(stack_by_index(source, bs)));
      Var logits = scale(linear(feats, g.param(model->w), g.param(model->b)), kOutputScale);
      Var ce = ce_loss(softmax(logits), labels);
      Var loss = ce;
      if (with_mmd) {
        std::vector<int> bt = cyc_t->take(cfg.batch_size);
        Var feats_t =
            model->extractor.forward(g, g.constant(stack_by_index(target, bt)));
        Var mmd = mmd_loss(feats, feats_t, cfg.mmd);
        loss = combine({ce, mmd}, {1.0, cfg.lambda_mmd});
      }
      if (!std::isfinite(loss.scalar()))
        throw numeric_error("baseline: non-finite loss");
      g.backward(loss);
      opt.step();
      acc_loss += loss.scalar();
    }
    res.epoch_loss.push_back(acc_loss / steps_per_epoch);
  }
  res.model = std::move(model);
  return res;
}

}  // namespace gtnp

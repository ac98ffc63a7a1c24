#pragma once

#include <memory>
#include <string>
#include <vector>

#include "gtnp/dataset.hpp"
#include "gtnp/embedding.hpp"
#include "gtnp/losses.hpp"
#include "gtnp/optim.hpp"

namespace gtnp {

// Capacity-matched comparison points: the same extractor as the main model
// with a plain softmax head. source_only trains on source labels alone;
// mmd_only adds feature-space MMD against unlabeled target batches.
struct BaselineConfig {
  enum class Variant { SourceOnly, MmdOnly };
  Variant variant = Variant::SourceOnly;
  int batch_size = 32;
  double learning_rate = 0.01;
  OptMethod optimizer = OptMethod::RMSprop;
  int epochs = 30;
  unsigned long long seed = 0;
  double lambda_mmd = 1.0;
  MmdConfig mmd;
  ModelDims dims;

  void validate() const;
};

std::string baseline_variant_name(BaselineConfig::Variant v);
BaselineConfig::Variant baseline_variant_from_string(const std::string& s);

struct BaselineModel {
  FeatureExtractor extractor;
  Parameter w, b;  // d_f -> classes
  int label_space = 0, in_h = 0, in_w = 0;

  Tensor predict_probabilities(const Tensor& x4) const;
  std::vector<Parameter*> params();
};

struct BaselineResult {
  std::unique_ptr<BaselineModel> model;
  std::vector<double> epoch_loss;  // mean total loss per epoch
};

BaselineResult train_baseline(const BaselineConfig& cfg, const DomainDataset& source,
                              const DomainDataset& target);

}  // namespace gtnp

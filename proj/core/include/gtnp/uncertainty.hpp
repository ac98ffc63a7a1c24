#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gtnp/dataset.hpp"
#include "gtnp/train.hpp"

namespace gtnp {

// Model-level uncertainty: dimension-averaged statistics of the global
// latent's variational parameters.
struct GlobalTraceRecord {
  int epoch = 0;
  double mean_avg = 0.0;
  double var_avg = 0.0;
};

GlobalTraceRecord track_global(const TrainState& s, int epoch);

// Sample-level uncertainty from Monte-Carlo draws of u ~ p(u | h), with the
// global latent fixed at its variational mean and z taken at the mean of
// q(z | u) per draw.
struct LocalUncertainty {
  int sample_id = 0;
  int n_draws = 0;
  int predicted = 0;
  std::vector<double> scores;     // softmax of per-class mean log-probability
  std::vector<double> variances;  // per-class variance over draw probabilities
  Tensor draws;                   // (n_draws, classes), each row sums to 1
};

LocalUncertainty local_uncertainty(const TrainState& s, const Tensor& x, int n_draws,
                                   uint64_t seed, int sample_id = 0);

struct UncertaintyReportConfig {
  int n_draws = 100;
  std::vector<int> selected_ids;  // samples that also get KDE blocks + draw CSVs
  uint64_t seed = 0;
  std::string config_hash;        // embedded in every emitted file
};

// Writes <out_dir>/uncertainty.json (global trace, per-sample table, KDE
// blocks) and one draw-matrix CSV per selected sample.
void uncertainty_report(const TrainState& s, const DomainDataset& ds, SetTag tag,
                        const std::vector<GlobalTraceRecord>& trace,
                        const UncertaintyReportConfig& cfg, const std::string& out_dir);

}  // namespace gtnp

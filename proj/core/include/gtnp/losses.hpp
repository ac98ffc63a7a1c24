#pragma once

#include <string>
#include <vector>

#include "gtnp/autograd.hpp"
#include "gtnp/gaussians.hpp"

namespace gtnp {

// Bandwidth strategy for the Gaussian MMD kernel.
struct MmdConfig {
  bool median_heuristic = true;  // recompute sigma per call from pooled distances
  double fixed_sigma = 1.0;      // used when median_heuristic is false
};

struct LossWeights {
  double lambda_mmd = 1.0;
  double amplitude = 0.1;  // weight of the global-latent prior KL
};

struct LossBreakdown {
  double dist_source = 0.0, dist_target = 0.0;
  double cls_source = 0.0, cls_target = 0.0;
  double mmd = 0.0, global_kl = 0.0;
  double total = 0.0;
  LossWeights weights;
};

// ----------------------------- value paths --------------------------------

// Mean over the batch of KL(q_i || p_i).
double distribution_loss(const std::vector<DiagGaussian>& q,
                         const std::vector<DiagGaussian>& p);

// Mean cross-entropy of row-stochastic probabilities against labels,
// probabilities floored at 1e-12 inside the log.
double classification_loss(const Tensor& probabilities, const std::vector<int>& labels);

// Median pairwise Euclidean distance of the pooled rows (diagonal excluded),
// floored at 1e-6. Treated as a constant for gradients.
double mmd_median_sigma(const Tensor& u_s, const Tensor& u_t);

// Coefficient matrix M for the biased squared-MMD statistic tr(K * M):
// +1/n_s^2 on source-source, +1/n_t^2 on target-target, -1/(n_s n_t) across.
Tensor mmd_coefficients(int n_s, int n_t);

// Biased squared MMD with Gaussian kernel, Gram-matrix form tr(K * M).
double mmd_loss(const Tensor& u_s, const Tensor& u_t, const MmdConfig& cfg);

// Weighted total; throws numeric_error naming the first non-finite part.
LossBreakdown total_loss(double dist_s, double dist_t, double cls_s, double cls_t,
                         double mmd, double global_kl, const LossWeights& w);

// ---------------------------- recorded paths ------------------------------

// Recorded squared MMD between embedding batches; sigma is resolved from cfg
// (median heuristic uses current values and is held constant for gradients).
Var mmd_loss(Var u_s, Var u_t, const MmdConfig& cfg);

// Recorded per-sample KL rows between (mean, logvar) pairs; returns (n, 1).
Var distribution_kl_rows(Var mean_q, Var logvar_q, Var mean_p, Var logvar_p);

}  // namespace gtnp

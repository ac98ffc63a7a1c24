#pragma once

#include <vector>

#include "gtnp/random.hpp"

namespace gtnp {

// Diagonal Gaussian in (mean, logvar) parameterization.
struct DiagGaussian {
  std::vector<double> mean;
  std::vector<double> logvar;

  int dim() const { return static_cast<int>(mean.size()); }
  void validate() const;  // matching sizes, finite entries
};

// z = mean + exp(logvar / 2) .* eps with eps drawn from `rng`.
std::vector<double> reparam_sample(const DiagGaussian& g, RandomStream& rng);

// Closed-form KL(q || p) between diagonal Gaussians:
// sum_d [ log s_p - log s_q + (s_q^2 + (mu_q - mu_p)^2) / (2 s_p^2) - 1/2 ].
double kl_diag_gaussians(const DiagGaussian& q, const DiagGaussian& p);

// Same formula on raw arrays, shared with the recorded-graph op.
double kl_diag_kernel(const double* mq, const double* lq, const double* mp,
                      const double* lp, int d);

}  // namespace gtnp

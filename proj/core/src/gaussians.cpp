#include "gtnp/gaussians.hpp"

#include <cmath>

#include "gtnp/errors.hpp"

namespace gtnp {

void DiagGaussian::validate() const {
  if (mean.size() != logvar.size())
    throw shape_error("DiagGaussian mean/logvar size mismatch");
  for (double v : mean)
    if (!std::isfinite(v)) throw numeric_error("DiagGaussian has non-finite mean");
  for (double v : logvar)
    if (!std::isfinite(v)) throw numeric_error("DiagGaussian has non-finite logvar");
}

std::vector<double> reparam_sample(const DiagGaussian& g, RandomStream& rng) {
  g.validate();
  std::vector<double> z(g.mean.size());
  for (size_t i = 0; i < z.size(); ++i)
    z[i] = g.mean[i] + std::exp(0.5 * g.logvar[i]) * rng.normal();
  return z;
}

double kl_diag_kernel(const double* mq, const double* lq, const double* mp,
                      const double* lp, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) {
    double dmu = mq[i] - mp[i];
    s += 0.5 * (lp[i] - lq[i]) + (std::exp(lq[i]) + dmu * dmu) / (2.0 * std::exp(lp[i])) - 0.5;
  }
  return s;
}

double kl_diag_gaussians(const DiagGaussian& q, const DiagGaussian& p) {
  q.validate();
  p.validate();
  if (q.dim() != p.dim()) throw shape_error("kl_diag_gaussians dimension mismatch");
  return kl_diag_kernel(q.mean.data(), q.logvar.data(), p.mean.data(), p.logvar.data(),
                        q.dim());
}

}  // namespace gtnp

// Objective terms: per-domain distribution KL, classification cross-entropy,
// the Gaussian-kernel MMD alignment term, and the weighted total.

#include "gtnp/losses.hpp"

#include <algorithm>
#include <cmath>

#include "gtnp/errors.hpp"

namespace gtnp {

double distribution_loss(const std::vector<DiagGaussian>& q,
                         const std::vector<DiagGaussian>& p) {
  if (q.size() != p.size() || q.empty())
    throw shape_error("distribution_loss needs matching non-empty batches");
  std::vector<double> terms(q.size());
  for (size_t i = 0; i < q.size(); ++i) terms[i] = kl_diag_gaussians(q[i], p[i]);
  return exact_sum(terms.data(), static_cast<int64_t>(terms.size())) /
         static_cast<double>(terms.size());
}

double classification_loss(const Tensor& probabilities, const std::vector<int>& labels) {
  int n = probabilities.dim(0), c = probabilities.dim(1);
  if (static_cast<size_t>(n) != labels.size())
    throw shape_error("classification_loss batch/label mismatch");
  std::vector<double> terms(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    int y = labels[static_cast<size_t>(i)];
    if (y < 0 || y >= c) throw data_error("classification_loss label out of range");
    terms[static_cast<size_t>(i)] = -std::log(std::max(probabilities.at(i, y), 1e-12));
  }
  return exact_sum(terms.data(), n) / n;
}

double mmd_median_sigma(const Tensor& u_s, const Tensor& u_t) {
  int n_s = u_s.dim(0), n_t = u_t.dim(0), d = u_s.dim(1);
  int n = n_s + n_t;
  std::vector<double> dists;
  dists.reserve(static_cast<size_t>(n) * (n - 1) / 2);
  auto row = [&](int i) {
    return i < n_s ? u_s.data.data() + static_cast<size_t>(i) * d
                   : u_t.data.data() + static_cast<size_t>(i - n_s) * d;
  };
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double *a = row(i), *b = row(j);
      double sq = 0.0;
      for (int k = 0; k < d; ++k) {
        double diff = a[k] - b[k];
        sq += diff * diff;
      }
      dists.push_back(std::sqrt(sq));
    }
  if (dists.empty()) throw data_error("mmd_median_sigma needs at least 2 pooled rows");
  std::sort(dists.begin(), dists.end());
  size_t m = dists.size();
  double median = m % 2 == 1 ? dists[m / 2] : 0.5 * (dists[m / 2 - 1] + dists[m / 2]);
  return std::max(median, 1e-6);
}

Tensor mmd_coefficients(int n_s, int n_t) {
  int n = n_s + n_t;
  Tensor m({n, n});
  double css = 1.0 / (static_cast<double>(n_s) * n_s);
  double ctt = 1.0 / (static_cast<double>(n_t) * n_t);
  double cst = -1.0 / (static_cast<double>(n_s) * n_t);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      bool si = i < n_s, sj = j < n_s;
      m.at(i, j) = si == sj ? (si ? css : ctt) : cst;
    }
  return m;
}

static double resolve_sigma(const Tensor& u_s, const Tensor& u_t, const MmdConfig& cfg) {
  if (cfg.median_heuristic) return mmd_median_sigma(u_s, u_t);
  if (!(cfg.fixed_sigma > 0.0)) throw config_error("fixed MMD sigma must be positive");
  return cfg.fixed_sigma;
}

double mmd_loss(const Tensor& u_s, const Tensor& u_t, const MmdConfig& cfg) {
  if (u_s.dim(0) < 2 || u_t.dim(0) < 2)
    throw data_error("mmd_loss needs at least 2 rows per set");
  if (u_s.dim(1) != u_t.dim(1)) throw shape_error("mmd_loss width mismatch");
  int n_s = u_s.dim(0), n_t = u_t.dim(0), d = u_s.dim(1);
  int n = n_s + n_t;
  double sigma = resolve_sigma(u_s, u_t, cfg);
  double gamma = -1.0 / (2.0 * sigma * sigma);
  Tensor coeff = mmd_coefficients(n_s, n_t);
  auto row = [&](int i) {
    return i < n_s ? u_s.data.data() + static_cast<size_t>(i) * d
                   : u_t.data.data() + static_cast<size_t>(i - n_s) * d;
  };
  std::vector<double> terms(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double *a = row(i), *b = row(j);
      double sq = 0.0;
      for (int k = 0; k < d; ++k) {
        double diff = a[k] - b[k];
        sq += diff * diff;
      }
      terms[static_cast<size_t>(i) * n + j] = std::exp(gamma * sq) * coeff.at(i, j);
    }
  return exact_sum(terms.data(), static_cast<int64_t>(terms.size()));
}

LossBreakdown total_loss(double dist_s, double dist_t, double cls_s, double cls_t,
                         double mmd, double global_kl, const LossWeights& w) {
  const struct { const char* name; double v; } parts[] = {
      {"dist_source", dist_s}, {"dist_target", dist_t}, {"cls_source", cls_s},
      {"cls_target", cls_t},   {"mmd", mmd},            {"global_kl", global_kl}};
  for (const auto& p : parts)
    if (!std::isfinite(p.v))
      throw numeric_error(std::string("non-finite loss term: ") + p.name);
  LossBreakdown out;
  out.dist_source = dist_s;
  out.dist_target = dist_t;
  out.cls_source = cls_s;
  out.cls_target = cls_t;
  out.mmd = mmd;
  out.global_kl = global_kl;
  out.weights = w;
  out.total = dist_s + dist_t + cls_s + cls_t + w.lambda_mmd * mmd +
              w.amplitude * global_kl;
  if (!std::isfinite(out.total)) throw numeric_error("non-finite total loss");
  return out;
}

Var mmd_loss(Var u_s, Var u_t, const MmdConfig& cfg) {
  const Tensor &vs = u_s.val(), &vt = u_t.val();
  if (vs.dim(0) < 2 || vt.dim(0) < 2)
    throw data_error("mmd_loss needs at least 2 rows per set");
  if (vs.dim(1) != vt.dim(1)) throw shape_error("mmd_loss width mismatch");
  int n_s = vs.dim(0), n_t = vt.dim(0);
  int n = n_s + n_t;
  double sigma = resolve_sigma(vs, vt, cfg);  // constant for gradients
  std::vector<int> rows_s(static_cast<size_t>(n_s)), rows_t(static_cast<size_t>(n_t));
  for (int i = 0; i < n_s; ++i) rows_s[static_cast<size_t>(i)] = i;
  for (int i = 0; i < n_t; ++i) rows_t[static_cast<size_t>(i)] = n_s + i;
  Var pooled = add(scatter_rows(u_s, rows_s, n), scatter_rows(u_t, rows_t, n));
  Var k = expv(scale(pairwise_sqdist(pooled, pooled), -1.0 / (2.0 * sigma * sigma)));
  return weighted_sum_all(k, mmd_coefficients(n_s, n_t));
}

Var distribution_kl_rows(Var mean_q, Var logvar_q, Var mean_p, Var logvar_p) {
  return kl_rows(mean_q, logvar_q, mean_p, logvar_p);
}

}  // namespace gtnp

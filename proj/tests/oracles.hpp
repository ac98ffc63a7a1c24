// Independent reference implementations used to validate the production
// code: brute-force double loops, Monte Carlo integration, and pair-counting
// statistics. Deliberately naive and slow.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "gtnp/random.hpp"
#include "gtnp/tensor.hpp"

namespace oracle {

// Biased squared MMD with a Gaussian kernel via the explicit three-sum form;
// plain accumulation, no Gram matrix.
inline double mmd2_double_loop(const gtnp::Tensor& x, const gtnp::Tensor& y, double sigma) {
  int n = x.dim(0), m = y.dim(0), d = x.dim(1);
  double inv = -1.0 / (2.0 * sigma * sigma);
  auto k = [&](const gtnp::Tensor& a, int i, const gtnp::Tensor& b, int j) {
    double s = 0.0;
    for (int c = 0; c < d; ++c) {
      double t = a.at(i, c) - b.at(j, c);
      s += t * t;
    }
    return std::exp(inv * s);
  };
  double xx = 0.0, yy = 0.0, xy = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) xx += k(x, i, x, j);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) yy += k(y, i, y, j);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) xy += k(x, i, y, j);
  return xx / (double(n) * n) + yy / (double(m) * m) - 2.0 * xy / (double(n) * m);
}

// The pooled median pairwise distance, recomputed naively (all i<j pairs,
// even count -> mean of the two middle order statistics).
inline double median_pairwise_distance(const gtnp::Tensor& x, const gtnp::Tensor& y) {
  int n = x.dim(0), m = y.dim(0), d = x.dim(1);
  gtnp::Tensor pooled({n + m, d});
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) pooled.at(i, c) = x.at(i, c);
  for (int i = 0; i < m; ++i)
    for (int c = 0; c < d; ++c) pooled.at(n + i, c) = y.at(i, c);
  std::vector<double> dist;
  for (int i = 0; i < n + m; ++i)
    for (int j = i + 1; j < n + m; ++j) {
      double s = 0.0;
      for (int c = 0; c < d; ++c) {
        double t = pooled.at(i, c) - pooled.at(j, c);
        s += t * t;
      }
      dist.push_back(std::sqrt(s));
    }
  std::sort(dist.begin(), dist.end());
  size_t k = dist.size();
  double med = (k % 2 == 1) ? dist[k / 2] : 0.5 * (dist[k / 2 - 1] + dist[k / 2]);
  return std::max(med, 1e-6);
}

// KL(q || p) between diagonal Gaussians by Monte Carlo: E_q[log q - log p].
inline double kl_monte_carlo(const std::vector<double>& mq, const std::vector<double>& lq,
                             const std::vector<double>& mp, const std::vector<double>& lp,
                             int64_t draws, uint64_t seed) {
  gtnp::RandomStream rng(seed);
  size_t d = mq.size();
  double acc = 0.0;
  for (int64_t t = 0; t < draws; ++t) {
    double term = 0.0;
    for (size_t i = 0; i < d; ++i) {
      double std_q = std::exp(0.5 * lq[i]);
      double z = mq[i] + std_q * rng.normal();
      double aq = (z - mq[i]) / std_q;
      double ap = (z - mp[i]) / std::exp(0.5 * lp[i]);
      term += -0.5 * (lq[i] + aq * aq) + 0.5 * (lp[i] + ap * ap);
    }
    acc += term;
  }
  return acc / double(draws);
}

// AUC as the Mann-Whitney pair statistic: P(score_pos > score_neg) with ties
// counted half.
inline double auc_pair_count(const std::vector<double>& scores,
                             const std::vector<int>& positive) {
  double wins = 0.0;
  int64_t pairs = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (!positive[i]) continue;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (positive[j]) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  return pairs == 0 ? 0.0 : wins / double(pairs);
}

// Shannon-style plug-in density estimate at a grid point, the slow way.
inline double kde_at(const std::vector<double>& samples, double x, double bw) {
  double inv = 1.0 / (bw * std::sqrt(2.0 * 3.14159265358979323846));
  double acc = 0.0;
  for (double s : samples) {
    double t = (x - s) / bw;
    acc += inv * std::exp(-0.5 * t * t);
  }
  return acc / double(samples.size());
}

}  // namespace oracle

#include "gtnp/kde.hpp"

#include <algorithm>
#include <cmath>

#include "gtnp/errors.hpp"

namespace gtnp {

static double quantile_sorted(const std::vector<double>& s, double q) {
  double pos = q * static_cast<double>(s.size() - 1);
  size_t lo = static_cast<size_t>(pos);
  size_t hi = std::min(lo + 1, s.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return s[lo] * (1.0 - frac) + s[hi] * frac;
}

double silverman_bandwidth(const std::vector<double>& samples) {
  if (samples.empty()) throw data_error("silverman_bandwidth on empty sample set");
  size_t n = samples.size();
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : samples) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n > 1 ? n - 1 : 1);
  double sd = std::sqrt(var);

  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);

  double spread;
  if (sd > 0.0 && iqr > 0.0)
    spread = std::min(sd, iqr / 1.34);
  else
    spread = std::max(sd, iqr / 1.34);
  double bw = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
  if (!(bw > 0.0)) bw = 1e-3;  // point-mass samples
  return bw;
}

std::vector<double> kde_estimate(const std::vector<double>& samples,
                                 const std::vector<double>& grid, double bandwidth) {
  if (samples.empty()) throw data_error("kde_estimate on empty sample set");
  double bw = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(samples);
  const double norm = 1.0 / (static_cast<double>(samples.size()) * bw * std::sqrt(2.0 * M_PI));
  std::vector<double> density(grid.size(), 0.0);
  for (size_t gi = 0; gi < grid.size(); ++gi) {
    double acc = 0.0;
    for (double s : samples) {
      double u = (grid[gi] - s) / bw;
      acc += std::exp(-0.5 * u * u);
    }
    density[gi] = acc * norm;
  }
  return density;
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> g(static_cast<size_t>(n));
  if (n == 1) {
    g[0] = lo;
    return g;
  }
  double step = (hi - lo) / static_cast<double>(n - 1);
  for (int i = 0; i < n; ++i) g[static_cast<size_t>(i)] = lo + step * i;
  return g;
}

}  // namespace gtnp

#pragma once

#include <vector>

namespace gtnp {

// Silverman's rule of thumb: 0.9 * min(sd, IQR / 1.34) * n^(-1/5), with a
// small floor for degenerate samples.
double silverman_bandwidth(const std::vector<double>& samples);

// Gaussian-kernel density estimate on the given grid. bandwidth <= 0 selects
// the Silverman default.
std::vector<double> kde_estimate(const std::vector<double>& samples,
                                 const std::vector<double>& grid,
                                 double bandwidth = 0.0);

// Evenly spaced grid of n points spanning [lo, hi].
std::vector<double> linspace(double lo, double hi, int n);

}  // namespace gtnp

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace gtnp {

// Scalar function of a flat parameter vector, with its analytic gradient.
struct GradProbe {
  std::function<double(const std::vector<double>&)> value;
  std::function<std::vector<double>(const std::vector<double>&)> gradient;
};

// Central-difference check: perturbs each coordinate by +-h and returns the
// maximum over coordinates of |analytic - numeric| / max(1, |analytic|).
// When max_coords > 0, a deterministic random subset of coordinates of that
// size is checked instead of all of them.
double gradient_check(const GradProbe& probe, const std::vector<double>& point,
                      double h, int max_coords = -1, uint64_t coord_seed = 0);

}  // namespace gtnp

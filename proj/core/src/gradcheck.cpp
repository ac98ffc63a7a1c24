#include "gtnp/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gtnp/errors.hpp"
#include "gtnp/random.hpp"

namespace gtnp {

double gradient_check(const GradProbe& probe, const std::vector<double>& point,
                      double h, int max_coords, uint64_t coord_seed) {
  if (h <= 0.0) throw numeric_error("gradient_check requires h > 0");
  std::vector<double> analytic = probe.gradient(point);
  if (analytic.size() != point.size())
    throw shape_error("gradient_check: gradient size mismatch");

  std::vector<size_t> coords(point.size());
  std::iota(coords.begin(), coords.end(), size_t{0});
  if (max_coords > 0 && static_cast<size_t>(max_coords) < coords.size()) {
    RandomStream rng = derive_stream(coord_seed, "gradcheck-coords");
    rng.shuffle(coords);
    coords.resize(static_cast<size_t>(max_coords));
  }

  std::vector<double> x = point;
  double worst = 0.0;
  for (size_t c : coords) {
    double orig = x[c];
    x[c] = orig + h;
    double fp = probe.value(x);
    x[c] = orig - h;
    double fm = probe.value(x);
    x[c] = orig;
    double numeric = (fp - fm) / (2.0 * h);
    double rel = std::fabs(analytic[c] - numeric) / std::max(1.0, std::fabs(analytic[c]));
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace gtnp

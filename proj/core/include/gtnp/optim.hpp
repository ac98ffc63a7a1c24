#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "gtnp/autograd.hpp"

namespace gtnp {

enum class OptMethod { Adam, RMSprop };

OptMethod opt_method_from_string(const std::string& s);
std::string opt_method_to_string(OptMethod m);

// First-order optimizer over a fixed set of parameters. Adam uses
// betas (0.9, 0.999), RMSprop smoothing 0.99; both use epsilon 1e-8.
class Optimizer {
 public:
  Optimizer(OptMethod method, double lr, std::vector<Parameter*> params);

  // Applies one update from the accumulated gradients, then clears them.
  // A non-finite gradient rejects the whole step and names the parameter.
  void step();
  void zero_grad();
  double lr() const { return lr_; }
  OptMethod method() const { return method_; }
  int64_t step_count() const { return t_; }

 private:
  OptMethod method_;
  double lr_;
  int64_t t_ = 0;
  std::vector<Parameter*> params_;
  std::vector<Tensor> m_;  // first moment (Adam) or unused
  std::vector<Tensor> v_;  // second moment
};

}  // namespace gtnp

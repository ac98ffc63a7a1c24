#include "gtnp/optim.hpp"

#include <cmath>

#include "gtnp/errors.hpp"

namespace gtnp {

static constexpr double kAdamBeta1 = 0.9;
static constexpr double kAdamBeta2 = 0.999;
static constexpr double kRmsRho = 0.99;
static constexpr double kEps = 1e-8;

OptMethod opt_method_from_string(const std::string& s) {
  if (s == "adam") return OptMethod::Adam;
  if (s == "rmsprop") return OptMethod::RMSprop;
  throw config_error("unknown optimizer '" + s + "' (expected adam or rmsprop)");
}

std::string opt_method_to_string(OptMethod m) {
  return m == OptMethod::Adam ? "adam" : "rmsprop";
}

Optimizer::Optimizer(OptMethod method, double lr, std::vector<Parameter*> params)
    : method_(method), lr_(lr), params_(std::move(params)) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (Parameter* p : params_) {
    m_.push_back(Tensor::zeros(p->value.shape));
    v_.push_back(Tensor::zeros(p->value.shape));
  }
}

void Optimizer::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

void Optimizer::step() {
  for (Parameter* p : params_)
    if (!p->grad.all_finite())
      throw numeric_error("optimizer step rejected: non-finite gradient in parameter '" +
                          p->name + "'");
  ++t_;
  for (size_t pi = 0; pi < params_.size(); ++pi) {
    Parameter& p = *params_[pi];
    Tensor& m = m_[pi];
    Tensor& v = v_[pi];
    if (method_ == OptMethod::Adam) {
      double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(t_));
      double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(t_));
      for (size_t i = 0; i < p.value.data.size(); ++i) {
        double g = p.grad.data[i];
        m.data[i] = kAdamBeta1 * m.data[i] + (1.0 - kAdamBeta1) * g;
        v.data[i] = kAdamBeta2 * v.data[i] + (1.0 - kAdamBeta2) * g * g;
        double mhat = m.data[i] / bc1;
        double vhat = v.data[i] / bc2;
        p.value.data[i] -= lr_ * mhat / (std::sqrt(vhat) + kEps);
      }
    } else {
      for (size_t i = 0; i < p.value.data.size(); ++i) {
        double g = p.grad.data[i];
        v.data[i] = kRmsRho * v.data[i] + (1.0 - kRmsRho) * g * g;
        p.value.data[i] -= lr_ * g / (std::sqrt(v.data[i]) + kEps);
      }
    }
    if (!p.value.all_finite())
      throw numeric_error("optimizer produced non-finite values in parameter '" + p.name + "'");
  }
  zero_grad();
}

}  // namespace gtnp

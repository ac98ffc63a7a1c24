#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gtnp/tensor.hpp"

namespace gtnp {

// Named trainable tensor with a persistent gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros(value.shape)) {}
  void zero_grad() { grad.fill(0.0); }
};

class Graph;

// Handle to a node in a recording graph.
struct Var {
  Graph* g = nullptr;
  int idx = -1;

  bool valid() const { return g != nullptr && idx >= 0; }
  const Tensor& val() const;
  double scalar() const;
};

// Dynamically recorded computation tape. Creation order is a topological
// order, so reverse-mode differentiation is a single reverse sweep.
class Graph {
 public:
  Var constant(Tensor v);
  // Leaf bound to a Parameter; memoized so each Parameter maps to one node.
  Var param(Parameter& p);

  // Seeds d(loss) = 1, sweeps the tape backwards, then adds each bound
  // leaf's gradient into its Parameter::grad.
  void backward(Var loss);

  int add_node(Tensor value, bool requires_grad);
  void set_back(int idx, std::function<void(Graph&)> back);
  const Tensor& value(int idx) const { return nodes_[static_cast<size_t>(idx)].value; }
  bool needs(int idx) const { return nodes_[static_cast<size_t>(idx)].requires_grad; }
  bool has_grad(int idx) const { return nodes_[static_cast<size_t>(idx)].grad_alloc; }
  Tensor& grad_ref(int idx);  // allocates zeros on first touch
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_alloc = false;
    std::function<void(Graph&)> back;
    Parameter* bound = nullptr;
  };
  std::vector<Node> nodes_;
  std::unordered_map<Parameter*, int> param_nodes_;
};

// ----------------------------- recorded ops ------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var matmul(Var a, Var b);
Var matmul_exact(Var a, Var b);  // order-stable forward reduction
Var linear(Var x, Var w, Var b);
Var relu(Var a);
Var sigmoid(Var a);
Var expv(Var a);
Var clamp(Var a, double lo, double hi);
Var concat_cols(Var a, Var b);
Var slice_cols(Var a, int c0, int c1);
Var broadcast_row(Var v, int rows);
Var broadcast_col(Var v, int cols);
Var transpose(Var a);
Var conv2d(Var x, Var k, Var bias);
Var maxpool2(Var x);
Var flatten2(Var x);
Var gather_rows(Var x, std::vector<int> rows);
Var scatter_rows(Var x, std::vector<int> rows, int n_out);
// Row-stochastic normalization; an all-zero row becomes uniform (constant)
// and raises a warning.
Var row_normalize(Var w, const std::string& context);
Var pairwise_sqdist(Var a, Var b);
// out = c * s * x with scalar variable s
Var scale_by(Var x, Var s, double c);
// out = mean + exp(logvar / 2) .* eps
Var gaussian_sample(Var mean, Var logvar, Tensor eps);
// Per-row KL(N(mq, exp(lq)) || N(mp, exp(lp))), result (n, 1)
Var kl_rows(Var mq, Var lq, Var mp, Var lp);
Var softmax(Var logits);
// Mean cross-entropy of row-stochastic probabilities against integer labels;
// probabilities are floored at 1e-12 before the log.
Var ce_loss(Var probs, const std::vector<int>& labels);
// Mean binary cross-entropy with logits against constant targets.
Var bce_logits_mean(Var logits, Tensor targets);
Var mean_all(Var a);
Var sum_all(Var a);
// sum(a .* w) with constant weights w, order-stable reduction
Var weighted_sum_all(Var a, Tensor w);
// sum_i coeffs[i] * terms[i] over scalar terms
Var combine(const std::vector<Var>& terms, const std::vector<double>& coeffs);

}  // namespace gtnp

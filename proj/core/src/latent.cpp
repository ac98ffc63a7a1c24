// Distribution stage: graph-conditioned "real" head, amortized "estimated"
// head, and the classifier over concatenated latents and embeddings.

#include "gtnp/latent.hpp"

#include <string>

#include "gtnp/embedding.hpp"  // init_dense, kLogvarClamp, kOutputScale
#include "gtnp/errors.hpp"

namespace gtnp {

void DependencyGraphs::validate() const {
  if (g.ndim() != 2 || g.dim(0) != g.dim(1))
    throw shape_error("dependency graph G must be square");
  if (a.numel() > 0 && (a.ndim() != 2 || a.dim(1) != g.dim(0)))
    throw shape_error("bipartite graph width must match reference count");
  if (!g.all_finite() || !a.all_finite())
    throw numeric_error("non-finite entries in dependency graphs");
  for (int i = 0; i < g.dim(0); ++i)
    for (int j = 0; j < g.dim(1); ++j) {
      double v = g.at(i, j);
      if (v < 0.0 || v > 1.0) throw numeric_error("G entry outside [0, 1]");
      if (std::abs(v - g.at(j, i)) != 0.0) throw numeric_error("G not symmetric");
    }
  if (!std::isfinite(log_tau)) throw numeric_error("non-finite log tau");
}

Tensor one_hot(const std::vector<int>& labels, int classes) {
  Tensor out({static_cast<int>(labels.size()), classes});
  for (size_t i = 0; i < labels.size(); ++i) {
    int y = labels[i];
    if (y < 0 || y >= classes) throw data_error("one_hot label out of range");
    out.at(static_cast<int>(i), y) = 1.0;
  }
  return out;
}

// ------------------------------ real head ---------------------------------

RealDistHead::RealDistHead(int d_u_, int classes_, int msg_hidden_, int d_z_,
                           RandomStream& rng) {
  d_u = d_u_;
  classes = classes_;
  msg_hidden = msg_hidden_;
  d_z = d_z_;
  msg_w = Parameter("real.msg.weight", init_dense(rng, d_u + classes, msg_hidden));
  msg_b = Parameter("real.msg.bias", Tensor::zeros({msg_hidden}));
  out_w = Parameter("real.out.weight", init_dense(rng, msg_hidden, 2 * d_z));
  out_b = Parameter("real.out.bias", Tensor::zeros({2 * d_z}));
}

std::vector<Parameter*> RealDistHead::params() {
  return {&msg_w, &msg_b, &out_w, &out_b};
}

Var RealDistHead::messages(Graph& g, Var u_r, const Tensor& onehot) {
  Var enc = concat_cols(u_r, g.constant(onehot));
  return relu(linear(enc, g.param(msg_w), g.param(msg_b)));
}

Tensor RealDistHead::messages(const Tensor& u_r, const Tensor& onehot) const {
  return relu(linear(concat_cols(u_r, onehot), msg_w.value, msg_b.value));
}

std::pair<Var, Var> RealDistHead::output(Graph& g, Var aggregated) {
  Var out = scale(linear(aggregated, g.param(out_w), g.param(out_b)), kOutputScale);
  Var mean = slice_cols(out, 0, d_z);
  Var logvar = clamp(slice_cols(out, d_z, 2 * d_z), -kLogvarClamp, kLogvarClamp);
  return {mean, logvar};
}

std::pair<Tensor, Tensor> RealDistHead::output(const Tensor& aggregated) const {
  Tensor out = scale(linear(aggregated, out_w.value, out_b.value), kOutputScale);
  Tensor mean = slice_cols(out, 0, d_z);
  Tensor logvar = clamp(slice_cols(out, d_z, 2 * d_z), -kLogvarClamp, kLogvarClamp);
  return {mean, logvar};
}

Tensor aggregate_messages(const Tensor& weight_row, const Tensor& msgs,
                          const std::string& context) {
  int n = msgs.dim(0);
  if (weight_row.numel() != n) throw shape_error("aggregate_messages row/message mismatch");
  double s = 0.0;
  for (int j = 0; j < n; ++j) s += weight_row.data[static_cast<size_t>(j)];
  Tensor row({1, n});
  if (!(s > 1e-300)) {
    warn("aggregate_messages: all-zero weight row in " + context +
         ", falling back to uniform weights");
    row.fill(1.0 / n);
  } else {
    for (int j = 0; j < n; ++j) row.at(0, j) = weight_row.data[static_cast<size_t>(j)] / s;
  }
  return matmul(row, msgs);
}

DiagGaussian real_distribution(int node, const Tensor& u_r, const std::vector<int>& y_r,
                               const DependencyGraphs& graphs, const RealDistHead& head) {
  int n_r = u_r.dim(0);
  int n_m = graphs.a.numel() > 0 ? graphs.a.dim(0) : 0;
  if (node < 0 || node >= n_r + n_m) throw data_error("real_distribution node out of range");
  if (static_cast<size_t>(n_r) != y_r.size())
    throw shape_error("real_distribution label count mismatch");

  Tensor row({n_r});
  if (node < n_r) {
    for (int j = 0; j < n_r; ++j) row.data[static_cast<size_t>(j)] = graphs.g.at(node, j);
    row.data[static_cast<size_t>(node)] = 0.0;  // a node never conditions on itself
  } else {
    for (int j = 0; j < n_r; ++j)
      row.data[static_cast<size_t>(j)] = graphs.a.at(node - n_r, j);
  }
  Tensor msgs = head.messages(u_r, one_hot(y_r, head.classes));
  Tensor agg = aggregate_messages(row, msgs, "real_distribution");
  auto [mean, logvar] = head.output(agg);
  DiagGaussian out;
  out.mean = mean.data;
  out.logvar = logvar.data;
  out.validate();
  return out;
}

// ---------------------------- estimated head ------------------------------

EstDistHead::EstDistHead(int d_u_, int d_z_, RandomStream& rng) {
  d_u = d_u_;
  d_z = d_z_;
  w = Parameter("est.weight", init_dense(rng, d_u, 2 * d_z));
  b = Parameter("est.bias", Tensor::zeros({2 * d_z}));
}

std::vector<Parameter*> EstDistHead::params() { return {&w, &b}; }

std::pair<Var, Var> EstDistHead::forward(Graph& g, Var u) {
  Var out = scale(linear(u, g.param(w), g.param(b)), kOutputScale);
  Var mean = slice_cols(out, 0, d_z);
  Var logvar = clamp(slice_cols(out, d_z, 2 * d_z), -kLogvarClamp, kLogvarClamp);
  return {mean, logvar};
}

std::pair<Tensor, Tensor> EstDistHead::infer(const Tensor& u) const {
  Tensor out = scale(linear(u, w.value, b.value), kOutputScale);
  Tensor mean = slice_cols(out, 0, d_z);
  Tensor logvar = clamp(slice_cols(out, d_z, 2 * d_z), -kLogvarClamp, kLogvarClamp);
  return {mean, logvar};
}

DiagGaussian estimated_distribution(const Tensor& u_i, const EstDistHead& head) {
  Tensor u = u_i;
  if (u.ndim() == 1) u.shape = {1, u.dim(0)};
  if (u.dim(1) != head.d_u) throw shape_error("estimated_distribution width mismatch");
  auto [mean, logvar] = head.infer(u);
  DiagGaussian out;
  out.mean = mean.data;
  out.logvar = logvar.data;
  out.validate();
  return out;
}

// ------------------------------ classifier --------------------------------

ClassifierHead::ClassifierHead(int d_z_, int d_u_, int classes_, RandomStream& rng) {
  d_z = d_z_;
  d_u = d_u_;
  classes = classes_;
  w = Parameter("classifier.weight", init_dense(rng, d_z + d_u, classes));
  b = Parameter("classifier.bias", Tensor::zeros({classes}));
}

std::vector<Parameter*> ClassifierHead::params() { return {&w, &b}; }

Var ClassifierHead::logits(Graph& g, Var z, Var u) {
  return scale(linear(concat_cols(z, u), g.param(w), g.param(b)), kOutputScale);
}

Tensor ClassifierHead::probabilities(const Tensor& z, const Tensor& u) const {
  return softmax_rows(scale(linear(concat_cols(z, u), w.value, b.value), kOutputScale));
}

std::vector<double> classify(const Tensor& z_i, const Tensor& u_i,
                             const ClassifierHead& head) {
  Tensor z = z_i, u = u_i;
  if (z.ndim() == 1) z.shape = {1, z.dim(0)};
  if (u.ndim() == 1) u.shape = {1, u.dim(0)};
  Tensor p = head.probabilities(z, u);
  return p.data;
}

}  // namespace gtnp

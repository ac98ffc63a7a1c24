// Reference-set graph construction: label adjacency, the two-layer GCN with
// node and edge heads, the RBF bipartite graph, and the pretraining loop that
// produces the frozen dependency graph.

#include "gtnp/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "gtnp/embedding.hpp"
#include "gtnp/errors.hpp"

namespace gtnp {

// ------------------------- adjacency construction -------------------------

Tensor label_adjacency(const std::vector<int>& labels) {
  if (labels.empty()) throw data_error("label_adjacency on empty label vector");
  int n = static_cast<int>(labels.size());
  Tensor a({n, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      a.at(i, j) = labels[static_cast<size_t>(i)] == labels[static_cast<size_t>(j)] ? 1.0 : 0.0;
  return a;
}

Tensor normalize_adjacency(const Tensor& adjacency) {
  if (adjacency.ndim() != 2 || adjacency.dim(0) != adjacency.dim(1))
    throw shape_error("normalize_adjacency expects a square matrix");
  int n = adjacency.dim(0);
  Tensor with_loops = adjacency;
  for (int i = 0; i < n; ++i) with_loops.at(i, i) += 1.0;
  std::vector<double> inv_sqrt_deg(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    double deg = exact_sum(&with_loops.at(i, 0), n);
    if (!(deg > 0.0)) throw numeric_error("non-positive node degree in adjacency");
    inv_sqrt_deg[static_cast<size_t>(i)] = 1.0 / std::sqrt(deg);
  }
  Tensor out({n, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out.at(i, j) = with_loops.at(i, j) * inv_sqrt_deg[static_cast<size_t>(i)] *
                     inv_sqrt_deg[static_cast<size_t>(j)];
  return out;
}

// --------------------------------- GCN ------------------------------------

GcnParams::GcnParams(int d_in_, int hidden_, int classes_, RandomStream& rng) {
  d_in = d_in_;
  hidden = hidden_;
  classes = classes_;
  w1 = Parameter("gcn.layer1.weight", init_dense(rng, d_in, hidden));
  b1 = Parameter("gcn.layer1.bias", Tensor::zeros({hidden}));
  w2 = Parameter("gcn.layer2.weight", init_dense(rng, hidden, hidden));
  b2 = Parameter("gcn.layer2.bias", Tensor::zeros({hidden}));
  node_w = Parameter("gcn.node.weight", init_dense(rng, hidden, classes));
  node_b = Parameter("gcn.node.bias", Tensor::zeros({classes}));
  edge_w = Parameter("gcn.edge.weight", init_dense(rng, 2 * hidden, 1));
  edge_b = Parameter("gcn.edge.bias", Tensor::zeros({1}));
}

std::vector<Parameter*> GcnParams::params() {
  return {&w1, &b1, &w2, &b2, &node_w, &node_b, &edge_w, &edge_b};
}

Tensor gcn_forward(const Tensor& node_features, const Tensor& adjacency,
                   const GcnParams& p) {
  if (node_features.dim(0) != adjacency.dim(0))
    throw shape_error("gcn_forward node/adjacency count mismatch");
  Tensor abar = normalize_adjacency(adjacency);
  int n = node_features.dim(0);
  Tensor h1 = relu(add(matmul_exact(abar, matmul(node_features, p.w1.value)),
                       broadcast_row(p.b1.value, n)));
  return add(matmul_exact(abar, matmul(h1, p.w2.value)), broadcast_row(p.b2.value, n));
}

Var gcn_forward(Graph& g, Var node_features, const Tensor& adjacency, GcnParams& p) {
  if (node_features.val().dim(0) != adjacency.dim(0))
    throw shape_error("gcn_forward node/adjacency count mismatch");
  Var abar = g.constant(normalize_adjacency(adjacency));
  int n = node_features.val().dim(0);
  Var h1 = relu(add(matmul_exact(abar, matmul(node_features, g.param(p.w1))),
                    broadcast_row(g.param(p.b1), n)));
  return add(matmul_exact(abar, matmul(h1, g.param(p.w2))),
             broadcast_row(g.param(p.b2), n));
}

// Shared directed-pair logit so the scalar op and the full matrix agree
// bit-for-bit.
static double pair_logit(const double* ui, const double* uj, const GcnParams& p) {
  int h = p.hidden;
  double s = p.edge_b.value.data[0];
  for (int k = 0; k < h; ++k) s += ui[k] * p.edge_w.value.data[static_cast<size_t>(k)];
  for (int k = 0; k < h; ++k) s += uj[k] * p.edge_w.value.data[static_cast<size_t>(h + k)];
  return s;
}

static double sigmoid1(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double edge_weight(const Tensor& u_i, const Tensor& u_j, const GcnParams& p) {
  if (u_i.numel() != p.hidden || u_j.numel() != p.hidden)
    throw shape_error("edge_weight expects vectors of GCN output width");
  return sigmoid1(pair_logit(u_i.data.data(), u_j.data.data(), p));
}

Tensor edge_weight_matrix(const Tensor& nodes, const GcnParams& p) {
  if (nodes.ndim() != 2 || nodes.dim(1) != p.hidden)
    throw shape_error("edge_weight_matrix expects (n, hidden) nodes");
  int n = nodes.dim(0);
  const double* base = nodes.data.data();
  size_t hid = static_cast<size_t>(p.hidden);
  Tensor w({n, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      w.at(i, j) = sigmoid1(pair_logit(base + i * hid, base + j * hid, p));
  Tensor g({n, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g.at(i, j) = 0.5 * (w.at(i, j) + w.at(j, i));
  return g;
}

// ----------------------------- bipartite graph -----------------------------

double bipartite_weight(const Tensor& u_i, const Tensor& u_j, double tau) {
  if (u_i.numel() != u_j.numel()) throw shape_error("bipartite_weight dimension mismatch");
  if (!(tau > 0.0)) throw numeric_error("bipartite_weight needs tau > 0");
  double sq = 0.0;
  for (size_t k = 0; k < u_i.data.size(); ++k) {
    double d = u_i.data[k] - u_j.data[k];
    sq += d * d;
  }
  return std::exp(-0.5 * tau * sq);
}

Tensor build_bipartite(const Tensor& u_m, const Tensor& u_r, double tau) {
  if (u_r.dim(0) == 0) throw data_error("build_bipartite with empty reference set");
  if (u_m.dim(1) != u_r.dim(1)) throw shape_error("build_bipartite width mismatch");
  Tensor sq = pairwise_sqdist(u_m, u_r);
  return exp_elem(scale(sq, -0.5 * tau));
}

// ------------------------------ pretraining --------------------------------

// Directed pair logits for every ordered (i, j): with edge weights split into
// left/right halves, logit(i, j) = u_i . w_left + u_j . w_right + b, so the
// full matrix is an outer sum of two projections.
static Var edge_logit_matrix(Graph& g, Var nodes, GcnParams& p) {
  int n = nodes.val().dim(0), h = p.hidden;
  Var wt = transpose(g.param(p.edge_w));            // (1, 2h)
  Var wl = transpose(slice_cols(wt, 0, h));         // (h, 1)
  Var wr = transpose(slice_cols(wt, h, 2 * h));     // (h, 1)
  Var s = matmul(nodes, wl);                        // (n, 1)
  Var t = matmul(nodes, wr);                        // (n, 1)
  Var l = add(broadcast_col(s, n), transpose(broadcast_col(t, n)));
  return add(l, broadcast_col(broadcast_row(g.param(p.edge_b), n), n));
}

PretrainResult pretrain_gcn(const Tensor& node_features, const std::vector<int>& labels,
                            int label_space, int hidden, int epochs, double lr,
                            OptMethod method, unsigned long long seed) {
  if (node_features.ndim() != 2) throw shape_error("pretrain_gcn expects (n, d) features");
  if (static_cast<size_t>(node_features.dim(0)) != labels.size())
    throw shape_error("pretrain_gcn feature/label count mismatch");
  std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2)
    throw data_error("pretrain_gcn needs at least 2 classes present");
  for (int y : labels)
    if (y < 0 || y >= label_space) throw data_error("pretrain_gcn label out of range");

  Tensor adjacency = label_adjacency(labels);
  RandomStream rng = derive_stream(seed, "gcn-init");
  PretrainResult res;
  res.params = GcnParams(node_features.dim(1), hidden, label_space, rng);
  GcnParams& p = res.params;

  std::vector<Parameter*> ps = p.params();
  Optimizer opt(method, lr, ps);
  int n = node_features.dim(0);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    Graph g;
    Var feats = g.constant(node_features);
    Var reps = gcn_forward(g, feats, adjacency, p);
    Var logits = linear(reps, g.param(p.node_w), g.param(p.node_b));
    Var node_ce = ce_loss(softmax(logits), labels);
    Var edge_bce = bce_logits_mean(edge_logit_matrix(g, reps, p), adjacency);
    Var loss = combine({node_ce, edge_bce}, {1.0, 1.0});

    GcnTraceRow row;
    row.epoch = epoch;
    row.node_ce = node_ce.scalar();
    row.edge_bce = edge_bce.scalar();
    int correct = 0;
    const Tensor& lv = logits.val();
    for (int i = 0; i < n; ++i) {
      int best = 0;
      for (int c = 1; c < label_space; ++c)
        if (lv.at(i, c) > lv.at(i, best)) best = c;
      if (best == labels[static_cast<size_t>(i)]) ++correct;
    }
    row.node_acc = static_cast<double>(correct) / n;
    res.trace.push_back(row);

    g.backward(loss);
    opt.step();
  }

  Tensor reps = gcn_forward(node_features, adjacency, p);
  res.g = edge_weight_matrix(reps, p);
  return res;
}

}  // namespace gtnp

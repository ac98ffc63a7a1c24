#pragma once

#include <vector>

#include "gtnp/autograd.hpp"
#include "gtnp/optim.hpp"
#include "gtnp/random.hpp"

namespace gtnp {

// ------------------------- adjacency construction -------------------------

// Binary same-class adjacency: A[i][j] = 1 iff label_i == label_j
// (diagonal included).
Tensor label_adjacency(const std::vector<int>& labels);

// Symmetric normalization with self-loops: D^{-1/2} (A + I) D^{-1/2}.
// Degree sums use order-stable reduction so permuting nodes permutes the
// result exactly.
Tensor normalize_adjacency(const Tensor& adjacency);

// --------------------------------- GCN ------------------------------------

// Two GCN layers (hidden width each), a node-classification head, and an
// edge-weight head scoring concatenated node pairs.
struct GcnParams {
  Parameter w1, b1;          // d_in -> hidden
  Parameter w2, b2;          // hidden -> hidden
  Parameter node_w, node_b;  // hidden -> classes
  Parameter edge_w, edge_b;  // 2*hidden -> 1
  int d_in = 0, hidden = 0, classes = 0;

  GcnParams() = default;
  GcnParams(int d_in, int hidden, int classes, RandomStream& rng);
  std::vector<Parameter*> params();
};

// Node representations after both layers: ReLU between layers, identity
// after the last. adjacency is the raw (unnormalized) matrix.
Tensor gcn_forward(const Tensor& node_features, const Tensor& adjacency,
                   const GcnParams& p);
Var gcn_forward(Graph& g, Var node_features, const Tensor& adjacency, GcnParams& p);

// Directed pair score sigmoid(FC([u_i | u_j])).
double edge_weight(const Tensor& u_i, const Tensor& u_j, const GcnParams& p);

// Symmetrized weighted adjacency over n node representations:
// G[i][j] = (w(i,j) + w(j,i)) / 2, entries in [0, 1].
Tensor edge_weight_matrix(const Tensor& nodes, const GcnParams& p);

// ----------------------------- bipartite graph -----------------------------

// RBF-style weight exp(-(tau/2) * ||u_i - u_j||^2), tau > 0.
double bipartite_weight(const Tensor& u_i, const Tensor& u_j, double tau);

// Full modeling-to-reference weight matrix (n_M x n_R).
Tensor build_bipartite(const Tensor& u_m, const Tensor& u_r, double tau);

// ------------------------------ pretraining --------------------------------

struct GcnTraceRow {
  int epoch = 0;
  double node_ce = 0.0;
  double edge_bce = 0.0;
  double node_acc = 0.0;
};

struct PretrainResult {
  GcnParams params;
  Tensor g;  // symmetrized edge weights over the pretraining nodes, frozen
  std::vector<GcnTraceRow> trace;
};

// Trains the GCN on fixed node features by minimizing node cross-entropy
// plus edge BCE against the label adjacency (equal weighting, full batch).
// Returns trained parameters, the resulting weighted graph, and the
// per-epoch trace.
PretrainResult pretrain_gcn(const Tensor& node_features, const std::vector<int>& labels,
                            int label_space, int hidden, int epochs, double lr,
                            OptMethod method, unsigned long long seed);

}  // namespace gtnp

#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "gtnp/autograd.hpp"
#include "gtnp/gaussians.hpp"
#include "gtnp/random.hpp"

namespace gtnp {

// Frozen reference graph plus the live bipartite weights that tie modeling
// samples to the reference set.
struct DependencyGraphs {
  Tensor g;             // n_R x n_R, symmetric, entries in [0, 1]
  Tensor a;             // n_M x n_R, entries in (0, 1]
  double log_tau = 0.0; // bandwidth stored as log to keep tau positive
  double tau() const { return std::exp(log_tau); }
  void validate() const;
};

Tensor one_hot(const std::vector<int>& labels, int classes);

// Graph-conditioned distribution head: a message network encoding
// [u_j | onehot(y_j)] per reference neighbor and an output network mapping
// the aggregated message to (mean, logvar).
struct RealDistHead {
  Parameter msg_w, msg_b;  // (d_u + classes) -> msg_hidden, ReLU
  Parameter out_w, out_b;  // msg_hidden -> 2 * d_z
  int d_u = 0, classes = 0, msg_hidden = 0, d_z = 0;

  RealDistHead() = default;
  RealDistHead(int d_u, int classes, int msg_hidden, int d_z, RandomStream& rng);
  std::vector<Parameter*> params();

  // Per-neighbor messages from reference embeddings and one-hot labels.
  Var messages(Graph& g, Var u_r, const Tensor& onehot);
  Tensor messages(const Tensor& u_r, const Tensor& onehot) const;

  // (mean, logvar) rows from aggregated messages; logvar clamped.
  std::pair<Var, Var> output(Graph& g, Var aggregated);
  std::pair<Tensor, Tensor> output(const Tensor& aggregated) const;
};

// Graph-conditioned distribution for one node. Nodes are indexed over the
// concatenation [reference set | modeling set]: node < n_R selects a
// reference node (its own entry excluded from the weight row), larger
// indices select modeling rows of the bipartite graph. Labels enter only
// through reference-set neighbors.
DiagGaussian real_distribution(int node, const Tensor& u_r, const std::vector<int>& y_r,
                               const DependencyGraphs& graphs, const RealDistHead& head);

// Normalized weighted aggregation of precomputed messages for one weight row.
// An all-zero row falls back to uniform weights with a warning.
Tensor aggregate_messages(const Tensor& weight_row, const Tensor& msgs,
                          const std::string& context);

// Amortized distribution head q(z | u).
struct EstDistHead {
  Parameter w, b;  // d_u -> 2 * d_z
  int d_u = 0, d_z = 0;

  EstDistHead() = default;
  EstDistHead(int d_u, int d_z, RandomStream& rng);
  std::vector<Parameter*> params();

  std::pair<Var, Var> forward(Graph& g, Var u);
  std::pair<Tensor, Tensor> infer(const Tensor& u) const;
};

DiagGaussian estimated_distribution(const Tensor& u_i, const EstDistHead& head);

// Softmax classifier over [z | u].
struct ClassifierHead {
  Parameter w, b;  // (d_z + d_u) -> classes
  int d_z = 0, d_u = 0, classes = 0;

  ClassifierHead() = default;
  ClassifierHead(int d_z, int d_u, int classes, RandomStream& rng);
  std::vector<Parameter*> params();

  Var logits(Graph& g, Var z, Var u);
  Tensor probabilities(const Tensor& z, const Tensor& u) const;
};

std::vector<double> classify(const Tensor& z_i, const Tensor& u_i,
                             const ClassifierHead& head);

}  // namespace gtnp

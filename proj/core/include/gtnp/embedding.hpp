#pragma once

#include <utility>
#include <vector>

#include "gtnp/autograd.hpp"
#include "gtnp/random.hpp"

namespace gtnp {

struct ModelDims {
  int d_f = 48;        // extractor output width
  int d_g = 16;        // global latent width
  int d_u = 64;        // local embedding width
  int d_z = 64;        // sample latent width
  int msg_hidden = 64; // message network width
  int gcn_hidden = 64; // graph network width
};

// Two 3x3 valid convolutions (1 -> 8 -> 16 channels), each followed by ReLU
// and 2x2 max pooling (odd trailing rows/cols dropped), then a dense
// projection of the flattened maps to d_f features.
struct FeatureExtractor {
  Parameter k1, b1, k2, b2, w, b;
  int in_h = 0, in_w = 0, flat = 0, d_f = 0;

  FeatureExtractor() = default;
  FeatureExtractor(int height, int width, int d_f, RandomStream& rng);

  Var forward(Graph& g, Var x4);      // x4: (B, 1, H, W)
  Tensor infer(const Tensor& x4) const;     // gradient-free path
  std::vector<Parameter*> params();
};

// Stacks (H, W) sample matrices into the (B, 1, H, W) block the extractor
// consumes.
Tensor stack_batch(const std::vector<const Tensor*>& mats);

// Trainable variational parameters of the dataset-level latent, initialized
// to the standard normal (mean 0, logvar 0).
struct GlobalLatent {
  Parameter mean, logvar;  // (1, d_g)

  GlobalLatent() = default;
  explicit GlobalLatent(int d_g);
  int dim() const { return mean.value.dim(1); }
  std::vector<Parameter*> params() { return {&mean, &logvar}; }
};

// h = [features | z_global] for every row of a batch.
Var augment_with_global(Var features, Var z_global);
Tensor augment_with_global(const Tensor& features, const Tensor& z_global);

// Dense map from h to the local embedding distribution p(u | h); logvar is
// clamped to [-10, 10].
struct EmbeddingHead {
  Parameter w, b;
  int d_u = 0;

  EmbeddingHead() = default;
  EmbeddingHead(int h_dim, int d_u, RandomStream& rng);

  std::pair<Var, Var> forward(Graph& g, Var h);                 // (mean, logvar)
  std::pair<Tensor, Tensor> infer(const Tensor& h) const;
  std::vector<Parameter*> params() { return {&w, &b}; }
};

constexpr double kLogvarClamp = 10.0;

// All output heads emit kOutputScale * (W x + b).  Per-parameter optimizers
// (Adam, RMSprop) take first steps of roughly lr / sqrt(1 - rho) per weight
// regardless of gradient magnitude, so a raw linear head's outputs can jump by
// fan-in * that amount in one step — enough to saturate logvar clamps and wreck
// early training.  The fixed post-linear scale shrinks output sensitivity to
// weight updates tenfold without limiting what the head can represent.
constexpr double kOutputScale = 0.1;

// He-uniform initialization bound for a layer with the given fan-in.
Tensor init_dense(RandomStream& rng, int fan_in, int fan_out);

}  // namespace gtnp

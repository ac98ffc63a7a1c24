#include "gtnp/embedding.hpp"

#include <cmath>

#include "gtnp/errors.hpp"

namespace gtnp {

static constexpr int kC1 = 8;
static constexpr int kC2 = 16;

Tensor init_dense(RandomStream& rng, int fan_in, int fan_out) {
  double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  return rng.uniform_tensor({fan_in, fan_out}, -bound, bound);
}

static Tensor init_conv(RandomStream& rng, int co, int ci, int kh, int kw) {
  double bound = std::sqrt(6.0 / static_cast<double>(ci * kh * kw));
  return rng.uniform_tensor({co, ci, kh, kw}, -bound, bound);
}

FeatureExtractor::FeatureExtractor(int height, int width, int d_f_, RandomStream& rng) {
  in_h = height;
  in_w = width;
  d_f = d_f_;
  int h1 = (height - 2) / 2, w1 = (width - 2) / 2;  // conv 3x3 valid, pool 2x2
  int h2 = (h1 - 2) / 2, w2 = (w1 - 2) / 2;
  if (height - 2 < 2 || width - 2 < 2 || h1 - 2 < 2 || w1 - 2 < 2)
    throw shape_error("extractor input " + std::to_string(height) + "x" +
                      std::to_string(width) + " too small for two conv+pool stages");
  flat = kC2 * h2 * w2;
  k1 = Parameter("extractor.conv1.weight", init_conv(rng, kC1, 1, 3, 3));
  b1 = Parameter("extractor.conv1.bias", Tensor::zeros({kC1}));
  k2 = Parameter("extractor.conv2.weight", init_conv(rng, kC2, kC1, 3, 3));
  b2 = Parameter("extractor.conv2.bias", Tensor::zeros({kC2}));
  w = Parameter("extractor.dense.weight", init_dense(rng, flat, d_f));
  b = Parameter("extractor.dense.bias", Tensor::zeros({d_f}));
}

Var FeatureExtractor::forward(Graph& g, Var x4) {
  Var c1 = maxpool2(relu(conv2d(x4, g.param(k1), g.param(b1))));
  Var c2 = maxpool2(relu(conv2d(c1, g.param(k2), g.param(b2))));
  return linear(flatten2(c2), g.param(w), g.param(b));
}

Tensor FeatureExtractor::infer(const Tensor& x4) const {
  Tensor c1 = maxpool2(relu(conv2d_valid(x4, k1.value, b1.value)));
  Tensor c2 = maxpool2(relu(conv2d_valid(c1, k2.value, b2.value)));
  return linear(flatten2(c2), w.value, b.value);
}

std::vector<Parameter*> FeatureExtractor::params() { return {&k1, &b1, &k2, &b2, &w, &b}; }

Tensor stack_batch(const std::vector<const Tensor*>& mats) {
  if (mats.empty()) throw shape_error("stack_batch on empty batch");
  int h = mats[0]->dim(0), w = mats[0]->dim(1);
  Tensor out({static_cast<int>(mats.size()), 1, h, w});
  size_t per = static_cast<size_t>(h) * w;
  for (size_t i = 0; i < mats.size(); ++i) {
    if (mats[i]->dim(0) != h || mats[i]->dim(1) != w)
      throw shape_error("stack_batch shape mismatch");
    std::copy(mats[i]->data.begin(), mats[i]->data.end(), out.data.begin() + i * per);
  }
  return out;
}

GlobalLatent::GlobalLatent(int d_g) {
  mean = Parameter("global.mean", Tensor::zeros({1, d_g}));
  logvar = Parameter("global.logvar", Tensor::zeros({1, d_g}));
}

Var augment_with_global(Var features, Var z_global) {
  return concat_cols(features, broadcast_row(z_global, features.val().dim(0)));
}

Tensor augment_with_global(const Tensor& features, const Tensor& z_global) {
  return concat_cols(features, broadcast_row(z_global, features.dim(0)));
}

EmbeddingHead::EmbeddingHead(int h_dim, int d_u_, RandomStream& rng) {
  d_u = d_u_;
  // Compact start: a small initial output layer keeps initial embedding
  // logvars near zero (unit sampling noise) while the weights remain free to
  // grow to full strength during training.
  Tensor w0 = init_dense(rng, h_dim, 2 * d_u);
  w0 = scale(w0, 0.1);
  w = Parameter("embed.weight", std::move(w0));
  b = Parameter("embed.bias", Tensor::zeros({2 * d_u}));
}

// No kOutputScale on this head: damping the embedding would also damp the
// global latent's pathway into every downstream head, removing the data-term
// pressure that makes its posterior sharpen during training.  Embedding drift
// is tolerated by the softmax-form graph conditioning instead.
std::pair<Var, Var> EmbeddingHead::forward(Graph& g, Var h) {
  Var out = linear(h, g.param(w), g.param(b));
  Var mean = slice_cols(out, 0, d_u);
  Var logvar = clamp(slice_cols(out, d_u, 2 * d_u), -kLogvarClamp, kLogvarClamp);
  return {mean, logvar};
}

std::pair<Tensor, Tensor> EmbeddingHead::infer(const Tensor& h) const {
  Tensor out = linear(h, w.value, b.value);
  Tensor mean = slice_cols(out, 0, d_u);
  Tensor logvar = clamp(slice_cols(out, d_u, 2 * d_u), -kLogvarClamp, kLogvarClamp);
  return {mean, logvar};
}

}  // namespace gtnp

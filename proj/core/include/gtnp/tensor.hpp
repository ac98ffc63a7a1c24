#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace gtnp {

// Dense row-major tensor of 64-bit floats, rank 1..4.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, double fill = 0.0);

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int> s, double v) { return Tensor(std::move(s), v); }
  static Tensor row(std::initializer_list<double> vals);
  static Tensor matrix(int rows, int cols, std::initializer_list<double> vals);

  int ndim() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  int64_t numel() const;
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  std::string shape_str() const;

  double& at(int i) { return data[static_cast<size_t>(i)]; }
  double at(int i) const { return data[static_cast<size_t>(i)]; }
  double& at(int i, int j) { return data[static_cast<size_t>(i) * dim(1) + j]; }
  double at(int i, int j) const { return data[static_cast<size_t>(i) * dim(1) + j]; }
  // (b, c, y, x) indexing for rank-4 activation blocks
  double& at4(int b, int c, int y, int x);
  double at4(int b, int c, int y, int x) const;
  double* ptr4(int b, int c, int y, int x);
  const double* ptr4(int b, int c, int y, int x) const;

  bool all_finite() const;
  void fill(double v);
};

// ----------------------------- value kernels -----------------------------
// Forward-only building blocks shared by the autodiff layer and the
// gradient-free inference paths.

Tensor matmul(const Tensor& a, const Tensor& b);
// matmul whose inner reductions use compensated (double-double) accumulation,
// making the result independent of summation order perturbations.
Tensor matmul_exact(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp_elem(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& a, int c0, int c1);
Tensor broadcast_row(const Tensor& v, int rows);
Tensor broadcast_col(const Tensor& v, int cols);
// x: (B, Cin, H, W), k: (Cout, Cin, kh, kw), bias: (Cout). Valid padding, stride 1.
Tensor conv2d_valid(const Tensor& x, const Tensor& k, const Tensor& bias);
// 2x2 max pooling with stride 2; odd trailing rows/cols are dropped.
Tensor maxpool2(const Tensor& x, std::vector<int>* argmax = nullptr);
Tensor flatten2(const Tensor& x);  // (B, C, H, W) -> (B, C*H*W)
// dense layer y = x W + b with x: (n, in), W: (in, out), b: (out)
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor pairwise_sqdist(const Tensor& a, const Tensor& b);
Tensor softmax_rows(const Tensor& logits);
Tensor log_softmax_rows(const Tensor& logits);

// Compensated (double-double) sum; the result is stable under reorderings of
// the addends for all magnitudes short of catastrophic 100-bit cancellation.
double exact_sum(const double* v, int64_t n);
double dot(const double* a, const double* b, int64_t n);

}  // namespace gtnp

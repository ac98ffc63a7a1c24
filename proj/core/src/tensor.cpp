#include "gtnp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

#include "gtnp/errors.hpp"

namespace gtnp {

void warn(const std::string& msg) { std::cerr << "[warn] " << msg << "\n"; }
void info(const std::string& msg) { std::cerr << "[info] " << msg << "\n"; }

Tensor::Tensor(std::vector<int> s, double fill) : shape(std::move(s)) {
  int64_t n = 1;
  for (int d : shape) {
    if (d < 0) throw shape_error("negative tensor dimension");
    n *= d;
  }
  data.assign(static_cast<size_t>(n), fill);
}

Tensor Tensor::row(std::initializer_list<double> vals) {
  Tensor t({static_cast<int>(vals.size())});
  std::copy(vals.begin(), vals.end(), t.data.begin());
  return t;
}

Tensor Tensor::matrix(int rows, int cols, std::initializer_list<double> vals) {
  if (static_cast<int>(vals.size()) != rows * cols)
    throw shape_error("matrix literal size mismatch");
  Tensor t({rows, cols});
  std::copy(vals.begin(), vals.end(), t.data.begin());
  return t;
}

int64_t Tensor::numel() const {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ")";
  return os.str();
}

double& Tensor::at4(int b, int c, int y, int x) {
  size_t idx = ((static_cast<size_t>(b) * dim(1) + c) * dim(2) + y) * dim(3) + x;
  return data[idx];
}

double Tensor::at4(int b, int c, int y, int x) const {
  size_t idx = ((static_cast<size_t>(b) * dim(1) + c) * dim(2) + y) * dim(3) + x;
  return data[idx];
}

double* Tensor::ptr4(int b, int c, int y, int x) {
  return &data[((static_cast<size_t>(b) * dim(1) + c) * dim(2) + y) * dim(3) + x];
}

const double* Tensor::ptr4(int b, int c, int y, int x) const {
  return &data[((static_cast<size_t>(b) * dim(1) + c) * dim(2) + y) * dim(3) + x];
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

void Tensor::fill(double v) { std::fill(data.begin(), data.end(), v); }

// ------------------------- compensated arithmetic -------------------------

static inline void two_sum(double a, double b, double& s, double& e) {
  s = a + b;
  double bb = s - a;
  e = (a - (s - bb)) + (b - bb);
}

static inline void two_prod(double a, double b, double& p, double& e) {
  p = a * b;
  constexpr double splitter = 134217729.0;  // 2^27 + 1
  double ca = splitter * a;
  double ahi = ca - (ca - a);
  double alo = a - ahi;
  double cb = splitter * b;
  double bhi = cb - (cb - b);
  double blo = b - bhi;
  e = ((ahi * bhi - p) + ahi * blo + alo * bhi) + alo * blo;
}

double exact_sum(const double* v, int64_t n) {
  double s = 0.0, c = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double t, e;
    two_sum(s, v[i], t, e);
    s = t;
    c += e;
  }
  return s + c;
}

double dot(const double* a, const double* b, int64_t n) {
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

// exact dot product via two_prod/two_sum cascade
static double dot_exact(const double* a, const double* b, int64_t n) {
  double s = 0.0, c = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double p, pe;
    two_prod(a[i], b[i], p, pe);
    double t, se;
    two_sum(s, p, t, se);
    s = t;
    c += se + pe;
  }
  return s + c;
}

// ----------------------------- value kernels ------------------------------

static void require(bool cond, const std::string& msg) {
  if (!cond) throw shape_error(msg);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(0),
          "matmul shape mismatch " + a.shape_str() + " x " + b.shape_str());
  int n = a.dim(0), k = a.dim(1), m = b.dim(0) ? b.dim(1) : 0;
  Tensor out({n, m});
  const double* pa = a.data.data();
  const double* pb = b.data.data();
  double* po = out.data.data();
  for (int i = 0; i < n; ++i) {
    const double* arow = pa + static_cast<size_t>(i) * k;
    double* orow = po + static_cast<size_t>(i) * m;
    for (int kk = 0; kk < k; ++kk) {
      double av = arow[kk];
      if (av == 0.0) continue;
      const double* brow = pb + static_cast<size_t>(kk) * m;
      for (int j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor matmul_exact(const Tensor& a, const Tensor& b) {
  require(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(0),
          "matmul shape mismatch " + a.shape_str() + " x " + b.shape_str());
  int n = a.dim(0), k = a.dim(1), m = b.dim(1);
  Tensor bt = transpose(b);
  Tensor out({n, m});
  for (int i = 0; i < n; ++i) {
    const double* arow = a.data.data() + static_cast<size_t>(i) * k;
    for (int j = 0; j < m; ++j) {
      const double* bcol = bt.data.data() + static_cast<size_t>(j) * k;
      out.at(i, j) = dot_exact(arow, bcol, k);
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require(a.ndim() == 2, "transpose expects a matrix");
  int n = a.dim(0), m = a.dim(1);
  Tensor out({m, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.same_shape(b), "add shape mismatch");
  Tensor out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require(a.same_shape(b), "sub shape mismatch");
  Tensor out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a.same_shape(b), "mul shape mismatch");
  Tensor out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out = a;
  for (double& v : out.data) v *= c;
  return out;
}

Tensor relu(const Tensor& a) {
  Tensor out = a;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor sigmoid(const Tensor& a) {
  Tensor out = a;
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  return out;
}

Tensor exp_elem(const Tensor& a) {
  Tensor out = a;
  for (double& v : out.data) v = std::exp(v);
  return out;
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  Tensor out = a;
  for (double& v : out.data) v = std::min(hi, std::max(lo, v));
  return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require(a.ndim() == 2 && b.ndim() == 2 && a.dim(0) == b.dim(0),
          "concat_cols row mismatch");
  int n = a.dim(0), pa = a.dim(1), pb = b.dim(1);
  Tensor out({n, pa + pb});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < pa; ++j) out.at(i, j) = a.at(i, j);
    for (int j = 0; j < pb; ++j) out.at(i, pa + j) = b.at(i, j);
  }
  return out;
}

Tensor slice_cols(const Tensor& a, int c0, int c1) {
  require(a.ndim() == 2 && 0 <= c0 && c0 <= c1 && c1 <= a.dim(1),
          "slice_cols out of range");
  int n = a.dim(0), m = c1 - c0;
  Tensor out({n, m});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) out.at(i, j) = a.at(i, c0 + j);
  return out;
}

Tensor broadcast_row(const Tensor& v, int rows) {
  require(v.ndim() == 1 || (v.ndim() == 2 && v.dim(0) == 1),
          "broadcast_row expects a vector");
  int d = v.ndim() == 1 ? v.dim(0) : v.dim(1);
  Tensor out({rows, d});
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < d; ++j) out.at(i, j) = v.data[static_cast<size_t>(j)];
  return out;
}

Tensor broadcast_col(const Tensor& v, int cols) {
  require(v.ndim() == 1 || (v.ndim() == 2 && v.dim(1) == 1),
          "broadcast_col expects a column vector");
  int n = v.dim(0);
  Tensor out({n, cols});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < cols; ++j) out.at(i, j) = v.data[static_cast<size_t>(i)];
  return out;
}

Tensor conv2d_valid(const Tensor& x, const Tensor& k, const Tensor& bias) {
  require(x.ndim() == 4 && k.ndim() == 4, "conv2d expects rank-4 input and kernel");
  require(x.dim(1) == k.dim(1), "conv2d channel mismatch");
  require(bias.numel() == k.dim(0), "conv2d bias size mismatch");
  int B = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  int Co = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  int oh = H - kh + 1, ow = W - kw + 1;
  require(oh > 0 && ow > 0, "conv2d input smaller than kernel");
  Tensor out({B, Co, oh, ow});
  for (int b = 0; b < B; ++b)
    for (int co = 0; co < Co; ++co) {
      double* obase = out.ptr4(b, co, 0, 0);
      double bv = bias.data[static_cast<size_t>(co)];
      for (int64_t i = 0; i < static_cast<int64_t>(oh) * ow; ++i) obase[i] = bv;
      for (int ci = 0; ci < Ci; ++ci)
        for (int ky = 0; ky < kh; ++ky)
          for (int kx = 0; kx < kw; ++kx) {
            double wv = k.at4(co, ci, ky, kx);
            if (wv == 0.0) continue;
            for (int oy = 0; oy < oh; ++oy) {
              const double* xrow = x.ptr4(b, ci, oy + ky, kx);
              double* orow = obase + static_cast<size_t>(oy) * ow;
              for (int ox = 0; ox < ow; ++ox) orow[ox] += wv * xrow[ox];
            }
          }
    }
  return out;
}

Tensor maxpool2(const Tensor& x, std::vector<int>* argmax) {
  require(x.ndim() == 4, "maxpool2 expects rank-4 input");
  int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  int oh = H / 2, ow = W / 2;
  require(oh > 0 && ow > 0, "maxpool2 input too small");
  Tensor out({B, C, oh, ow});
  if (argmax) argmax->assign(static_cast<size_t>(out.numel()), -1);
  size_t oidx = 0;
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox, ++oidx) {
          int iy = oy * 2, ix = ox * 2;
          double best = x.at4(b, c, iy, ix);
          int besti = ((b * C + c) * H + iy) * W + ix;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              double v = x.at4(b, c, iy + dy, ix + dx);
              if (v > best) {
                best = v;
                besti = ((b * C + c) * H + iy + dy) * W + ix + dx;
              }
            }
          out.data[oidx] = best;
          if (argmax) (*argmax)[oidx] = besti;
        }
  return out;
}

Tensor flatten2(const Tensor& x) {
  require(x.ndim() >= 2, "flatten2 expects rank >= 2");
  int B = x.dim(0);
  Tensor out = x;
  out.shape = {B, static_cast<int>(x.numel() / B)};
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require(x.ndim() == 2 && w.ndim() == 2 && x.dim(1) == w.dim(0),
          "linear shape mismatch " + x.shape_str() + " x " + w.shape_str());
  require(b.numel() == w.dim(1), "linear bias size mismatch");
  int n = x.dim(0), k = x.dim(1), m = w.dim(1);
  Tensor out({n, m});
  for (int i = 0; i < n; ++i) {
    double* orow = out.data.data() + static_cast<size_t>(i) * m;
    for (int j = 0; j < m; ++j) orow[j] = b.data[static_cast<size_t>(j)];
    const double* xrow = x.data.data() + static_cast<size_t>(i) * k;
    for (int kk = 0; kk < k; ++kk) {
      double xv = xrow[kk];
      if (xv == 0.0) continue;
      const double* wrow = w.data.data() + static_cast<size_t>(kk) * m;
      for (int j = 0; j < m; ++j) orow[j] += xv * wrow[j];
    }
  }
  return out;
}

Tensor pairwise_sqdist(const Tensor& a, const Tensor& b) {
  require(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(1),
          "pairwise_sqdist feature mismatch");
  int n = a.dim(0), m = b.dim(0), d = a.dim(1);
  Tensor out({n, m});
  for (int i = 0; i < n; ++i) {
    const double* ar = a.data.data() + static_cast<size_t>(i) * d;
    for (int j = 0; j < m; ++j) {
      const double* br = b.data.data() + static_cast<size_t>(j) * d;
      double s = 0.0;
      for (int t = 0; t < d; ++t) {
        double diff = ar[t] - br[t];
        s += diff * diff;
      }
      out.at(i, j) = s;
    }
  }
  return out;
}

Tensor softmax_rows(const Tensor& logits) {
  require(logits.ndim() == 2, "softmax_rows expects a matrix");
  int n = logits.dim(0), m = logits.dim(1);
  Tensor out({n, m});
  for (int i = 0; i < n; ++i) {
    double mx = logits.at(i, 0);
    for (int j = 1; j < m; ++j) mx = std::max(mx, logits.at(i, j));
    double z = 0.0;
    for (int j = 0; j < m; ++j) {
      double e = std::exp(logits.at(i, j) - mx);
      out.at(i, j) = e;
      z += e;
    }
    for (int j = 0; j < m; ++j) out.at(i, j) /= z;
  }
  return out;
}

Tensor log_softmax_rows(const Tensor& logits) {
  require(logits.ndim() == 2, "log_softmax_rows expects a matrix");
  int n = logits.dim(0), m = logits.dim(1);
  Tensor out({n, m});
  for (int i = 0; i < n; ++i) {
    double mx = logits.at(i, 0);
    for (int j = 1; j < m; ++j) mx = std::max(mx, logits.at(i, j));
    double z = 0.0;
    for (int j = 0; j < m; ++j) z += std::exp(logits.at(i, j) - mx);
    double lz = std::log(z) + mx;
    for (int j = 0; j < m; ++j) out.at(i, j) = logits.at(i, j) - lz;
  }
  return out;
}

}  // namespace gtnp

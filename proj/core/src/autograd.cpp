#include "gtnp/autograd.hpp"

#include <algorithm>
#include <cmath>

#include "gtnp/errors.hpp"

namespace gtnp {

const Tensor& Var::val() const { return g->value(idx); }

double Var::scalar() const {
  const Tensor& t = val();
  if (t.numel() != 1) throw shape_error("scalar() on tensor " + t.shape_str());
  return t.data[0];
}

Var Graph::constant(Tensor v) { return Var{this, add_node(std::move(v), false)}; }

Var Graph::param(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var{this, it->second};
  int idx = add_node(p.value, true);
  nodes_[static_cast<size_t>(idx)].bound = &p;
  param_nodes_[&p] = idx;
  return Var{this, idx};
}

int Graph::add_node(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void Graph::set_back(int idx, std::function<void(Graph&)> back) {
  nodes_[static_cast<size_t>(idx)].back = std::move(back);
}

Tensor& Graph::grad_ref(int idx) {
  Node& n = nodes_[static_cast<size_t>(idx)];
  if (!n.grad_alloc) {
    n.grad = Tensor::zeros(n.value.shape);
    n.grad_alloc = true;
  }
  return n.grad;
}

void Graph::backward(Var loss) {
  if (loss.g != this) throw numeric_error("backward() on a foreign graph");
  if (value(loss.idx).numel() != 1) throw shape_error("backward() expects a scalar loss");
  if (!nodes_[static_cast<size_t>(loss.idx)].requires_grad)
    throw numeric_error("backward() on a loss with no trainable inputs");
  grad_ref(loss.idx).data[0] = 1.0;
  for (int i = loss.idx; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.grad_alloc && n.back) n.back(*this);
  }
  for (auto& [p, idx] : param_nodes_) {
    Node& n = nodes_[static_cast<size_t>(idx)];
    if (!n.grad_alloc) continue;
    for (size_t j = 0; j < p->grad.data.size(); ++j) p->grad.data[j] += n.grad.data[j];
  }
}

// ------------------------------ op helpers -------------------------------

static Graph* common_graph(Var a, Var b) {
  if (a.g != b.g) throw numeric_error("operands from different graphs");
  return a.g;
}

// Creates the output node and registers the backward closure with the output
// index baked in. `back(g, out_idx)` runs only when gradient reached the node.
template <typename F>
static Var make_op(Graph* g, Tensor value, bool rq, F&& back) {
  int out = g->add_node(std::move(value), rq);
  if (rq) {
    g->set_back(out, [out, back = std::forward<F>(back)](Graph& gr) { back(gr, out); });
  }
  return Var{g, out};
}

Var add(Var a, Var b) {
  Graph* g = common_graph(a, b);
  bool rq = g->needs(a.idx) || g->needs(b.idx);
  int ai = a.idx, bi = b.idx;
  return make_op(g, add(a.val(), b.val()), rq, [ai, bi](Graph& gr, int out) {
    const Tensor& go = gr.grad_ref(out);
    if (gr.needs(ai)) {
      Tensor& da = gr.grad_ref(ai);
      for (size_t i = 0; i < da.data.size(); ++i) da.data[i] += go.data[i];
    }
    if (gr.needs(bi)) {
      Tensor& db = gr.grad_ref(bi);
      for (size_t i = 0; i < db.data.size(); ++i) db.data[i] += go.data[i];
    }
  });
}

Var sub(Var a, Var b) {
  Graph* g = common_graph(a, b);
  bool rq = g->needs(a.idx) || g->needs(b.idx);
  int ai = a.idx, bi = b.idx;
  return make_op(g, sub(a.val(), b.val()), rq, [ai, bi](Graph& gr, int out) {
    const Tensor& go = gr.grad_ref(out);
    if (gr.needs(ai)) {
      Tensor& da = gr.grad_ref(ai);
      for (size_t i = 0; i < da.data.size(); ++i) da.data[i] += go.data[i];
    }
    if (gr.needs(bi)) {
      Tensor& db = gr.grad_ref(bi);
      for (size_t i = 0; i < db.data.size(); ++i) db.data[i] -= go.data[i];
    }
  });
}

Var mul(Var a, Var b) {
  Graph* g = common_graph(a, b);
  bool rq = g->needs(a.idx) || g->needs(b.idx);
  int ai = a.idx, bi = b.idx;
  return make_op(g, mul(a.val(), b.val()), rq, [ai, bi](Graph& gr, int out) {
    const Tensor& go = gr.grad_ref(out);
    const Tensor& av = gr.value(ai);
    const Tensor& bv = gr.value(bi);
    if (gr.needs(ai)) {
      Tensor& da = gr.grad_ref(ai);
      for (size_t i = 0; i < da.data.size(); ++i) da.data[i] += go.data[i] * bv.data[i];
    }
    if (gr.needs(bi)) {
      Tensor& db = gr.grad_ref(bi);
      for (size_t i = 0; i < db.data.size(); ++i) db.data[i] += go.data[i] * av.data[i];
    }
  });
}

Var scale(Var a, double c) {
  Graph* g = a.g;
  bool rq = g->needs(a.idx);
  int ai = a.idx;
  return make_op(g, scale(a.val(), c), rq, [ai, c](Graph& gr, int out) {
    const Tensor& go = gr.grad_ref(out);
    Tensor& da = gr.grad_ref(ai);
    for (size_t i = 0; i < da.data.size(); ++i) da.data[i] += c * go.data[i];
  });
}

static Var matmul_impl(Var a, Var b, bool exact) {
  Graph* g = common_graph(a, b);
  bool rq = g->needs(a.idx) || g->needs(b.idx);
  int ai = a.idx, bi = b.idx;
  Tensor out = exact ? matmul_exact(a.val(), b.val()) : matmul(a.val(), b.val());
  return make_op(g, std::move(out), rq, [ai, bi](Graph& gr, int out_idx) {
    const Tensor& go = gr.grad_ref(out_idx);
    if (gr.needs(ai)) {
      Tensor da = matmul(go, transpose(gr.value(bi)));
      Tensor& slot = gr.grad_ref(ai);
      for (size_t i = 0; i < slot.data.size(); ++i) slot.data[i] += da.data[i];
    }
    if (gr.needs(bi)) {
      Tensor db = matmul(transpose(gr.value(ai)), go);
      Tensor& slot = gr.grad_ref(bi);
      for (size_t i = 0; i < slot.data.size(); ++i) slot.data[i] += db.data[i];
    }
  });
}

Var matmul(Var a, Var b) { return matmul_impl(a, b, false); }
Var matmul_exact(Var a, Var b) { return matmul_impl(a, b, true); }

Var linear(Var x, Var w, Var b) {
  Graph* g = common_graph(x, w);
  common_graph(w, b);
  bool rq = g->needs(x.idx) || g->needs(w.idx) || g->needs(b.idx);
  int xi = x.idx, wi = w.idx, bi = b.idx;
  return make_op(g, linear(x.val(), w.val(), b.val()), rq, [xi, wi, bi](Graph& gr, int out) {
    const Tensor& go = gr.grad_ref(out);
    int n = go.dim(0), m = go.dim(1);
    if (gr.needs(xi)) {
      Tensor dx = matmul(go, transpose(gr.value(wi)));
      Tensor& slot = gr.grad_ref(xi);
      for (size_t i = 0; i < slot.data.size(); ++i) slot.data[i] += dx.data[i];
    }
    if (gr.needs(wi)) {
      Tensor dw = matmul(transpose(gr.value(xi)), go);
      Tensor& slot = gr.grad_ref(wi);
      for (size_t i = 0; i < slot.data.size(); ++i) slot.data[i] += dw.data[i];
    }
    if (gr.needs(bi)) {
      Tensor& db = gr.grad_ref(bi);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) db.data[static_cast<size_t>(j)] += go.at(i, j);
    }
  });
}

Var relu(Var a) {
  Graph* g = a.g;
  bool rq = g->needs(a.idx);
  int ai = a.idx;
  return make_op(g, relu(a.val()), rq, [ai](Graph& gr, int out) {
    const Tensor& go = gr.grad_ref(out);
    const Tensor& av = gr.value(ai);
    Tensor& da = gr.grad_ref(ai);
    for (size_t i = 0; i < da.data.size(); ++i)
      if (av.data[i] > 0.0) da.data[i] += go.data[i];
  });
}

Var sigmoid(Var a) {
  Graph* g = a.g;
  bool rq = g->needs(a.idx);
  int ai = a.idx;
  return make_op(g, sigmoid(a.val()), rq, [ai](Graph& gr, int out) {
    const Tensor& go = gr.grad_ref(out);
    const Tensor& y = gr.value(out);
    Tensor& da = gr.grad_ref(ai);
    for (size_t i = 0; i < da.data.size(); ++i)
      da.data[i] += go.data[i] * y.data[i] * (1.0 - y.data[i]);
  });
}

Var expv(Var a) {
  Graph* g = a.g;
  bool rq = g->needs(a.idx);
  int ai = a.idx;
  return make_op(g, exp_elem(a.val()), rq, [ai](Graph& gr, int out) {
    const Tensor& go = gr.grad_ref(out);
    const Tensor& y = gr.value(out);
    Tensor& da = gr.grad_ref(ai);
    for (size_t i = 0; i < da.data.size(); ++i) da.data[i] += go.data[i] * y.data[i];
  });
}

Var clamp(Var a, double lo, double hi) {
  Graph* g = a.g;
  bool rq = g->needs(a.idx);
  int ai = a.idx;
  return make_op(g, clamp(a.val(), lo, hi), rq, [ai, lo, hi](Graph& gr, int out) {
    const Tensor& go = gr.grad_ref(out);
    const Tensor& av = gr.value(ai);
    Tensor& da = gr.grad_ref(ai);
    for (size_t i = 0; i < da.data.size(); ++i)
      if (av.data[i] > lo && av.data[i] < hi) da.data[i] += go.data[i];
  });
}

Var concat_cols(Var a, Var b) {
  Graph* g = common_graph(a, b);
  bool rq = g->needs(a.idx) || g->needs(b.idx);
  int ai = a.idx, bi = b.idx;
  int pa = a.val().dim(1), pb = b.val().dim(1);
  return make_op(g, concat_cols(a.val(), b.val()), rq, [ai, bi, pa, pb](Graph& gr, int out) {
    const Tensor& go = gr.grad_ref(out);
    int n = go.dim(0);
    if (gr.needs(ai)) {
      Tensor& da = gr.grad_ref(ai);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < pa; ++j) da.at(i, j) += go.at(i, j);
    }
    if (gr.needs(bi)) {
      Tensor& db = gr.grad_ref(bi);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < pb; ++j) db.at(i, j) += go.at(i, pa + j);
    }
  });
}

Var slice_cols(Var a, int c0, int c1) {
  Graph* g = a.g;
  bool rq = g->needs(a.idx);
  int ai = a.idx;
  return make_op(g, slice_cols(a.val(), c0, c1), rq, [ai, c0, c1](Graph& gr, int out) {
    const Tensor& go = gr.grad_ref(out);
    Tensor& da = gr.grad_ref(ai);
    int n = go.dim(0), m = c1 - c0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) da.at(i, c0 + j) += go.at(i, j);
  });
}

Var broadcast_row(Var v, int rows) {
  Graph* g = v.g;
  bool rq = g->needs(v.idx);
  int vi = v.idx;
  return make_op(g, broadcast_row(v.val(), rows), rq, [vi](Graph& gr, int out) {
    const Tensor& go = gr.grad_ref(out);
    Tensor& dv = gr.grad_ref(vi);
    int n = go.dim(0), d = go.dim(1);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) dv.data[static_cast<size_t>(j)] += go.at(i, j);
  });
}

Var broadcast_col(Var v, int cols) {
  Graph* g = v.g;
  bool rq = g->needs(v.idx);
  int vi = v.idx;
  return make_op(g, broadcast_col(v.val(), cols), rq, [vi](Graph& gr, int out) {
    const Tensor& go = gr.grad_ref(out);
    Tensor& dv = gr.grad_ref(vi);
    int n = go.dim(0), d = go.dim(1);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) dv.data[static_cast<size_t>(i)] += go.at(i, j);
  });
}

Var transpose(Var a) {
  Graph* g = a.g;
  bool rq = g->needs(a.idx);
  int ai = a.idx;
  return make_op(g, transpose(a.val()), rq, [ai](Graph& gr, int out) {
    const Tensor& go = gr.grad_ref(out);
    Tensor& da = gr.grad_ref(ai);
    int n = go.dim(0), m = go.dim(1);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) da.at(j, i) += go.at(i, j);
  });
}

Var conv2d(Var x, Var k, Var bias) {
  Graph* g = common_graph(x, k);
  common_graph(k, bias);
  bool rq = g->needs(x.idx) || g->needs(k.idx) || g->needs(bias.idx);
  int xi = x.idx, ki = k.idx, bi = bias.idx;
  return make_op(g, conv2d_valid(x.val(), k.val(), bias.val()), rq,
                 [xi, ki, bi](Graph& gr, int out) {
    const Tensor& go = gr.grad_ref(out);
    const Tensor& xv = gr.value(xi);
    const Tensor& kv = gr.value(ki);
    int B = xv.dim(0), Ci = xv.dim(1);
    int Co = kv.dim(0), kh = kv.dim(2), kw = kv.dim(3);
    int oh = go.dim(2), ow = go.dim(3);
    bool nx = gr.needs(xi), nk = gr.needs(ki), nb = gr.needs(bi);
    Tensor* dx = nx ? &gr.grad_ref(xi) : nullptr;
    Tensor* dk = nk ? &gr.grad_ref(ki) : nullptr;
    Tensor* db = nb ? &gr.grad_ref(bi) : nullptr;
    for (int b = 0; b < B; ++b)
      for (int co = 0; co < Co; ++co) {
        const double* gbase = go.ptr4(b, co, 0, 0);
        if (nb) {
          double s = 0.0;
          for (int64_t i = 0; i < static_cast<int64_t>(oh) * ow; ++i) s += gbase[i];
          db->data[static_cast<size_t>(co)] += s;
        }
        for (int ci = 0; ci < Ci; ++ci)
          for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
              double wv = kv.at4(co, ci, ky, kx);
              double wacc = 0.0;
              for (int oy = 0; oy < oh; ++oy) {
                const double* grow = gbase + static_cast<size_t>(oy) * ow;
                const double* xrow = xv.ptr4(b, ci, oy + ky, kx);
                if (nk)
                  for (int ox = 0; ox < ow; ++ox) wacc += grow[ox] * xrow[ox];
                if (nx) {
                  double* dxrow = dx->ptr4(b, ci, oy + ky, kx);
                  for (int ox = 0; ox < ow; ++ox) dxrow[ox] += grow[ox] * wv;
                }
              }
              if (nk) dk->at4(co, ci, ky, kx) += wacc;
            }
      }
  });
}

Var maxpool2(Var x) {
  Graph* g = x.g;
  bool rq = g->needs(x.idx);
  int xi = x.idx;
  std::vector<int> argmax;
  Tensor out = maxpool2(x.val(), &argmax);
  return make_op(g, std::move(out), rq, [xi, argmax = std::move(argmax)](Graph& gr, int out_idx) {
    const Tensor& go = gr.grad_ref(out_idx);
    Tensor& dx = gr.grad_ref(xi);
    for (size_t i = 0; i < argmax.size(); ++i)
      dx.data[static_cast<size_t>(argmax[i])] += go.data[i];
  });
}

Var flatten2(Var x) {
  Graph* g = x.g;
  bool rq = g->needs(x.idx);
  int xi = x.idx;
  return make_op(g, flatten2(x.val()), rq, [xi](Graph& gr, int out) {
    const Tensor& go = gr.grad_ref(out);
    Tensor& dx = gr.grad_ref(xi);
    for (size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += go.data[i];
  });
}

Var gather_rows(Var x, std::vector<int> rows) {
  Graph* g = x.g;
  bool rq = g->needs(x.idx);
  int xi = x.idx;
  const Tensor& xv = x.val();
  int m = xv.dim(1);
  Tensor out({static_cast<int>(rows.size()), m});
  for (size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < m; ++j) out.at(static_cast<int>(i), j) = xv.at(rows[i], j);
  return make_op(g, std::move(out), rq, [xi, rows = std::move(rows), m](Graph& gr, int out_idx) {
    const Tensor& go = gr.grad_ref(out_idx);
    Tensor& dx = gr.grad_ref(xi);
    for (size_t i = 0; i < rows.size(); ++i)
      for (int j = 0; j < m; ++j) dx.at(rows[i], j) += go.at(static_cast<int>(i), j);
  });
}

Var scatter_rows(Var x, std::vector<int> rows, int n_out) {
  Graph* g = x.g;
  bool rq = g->needs(x.idx);
  int xi = x.idx;
  const Tensor& xv = x.val();
  if (static_cast<int>(rows.size()) != xv.dim(0))
    throw shape_error("scatter_rows index count mismatch");
  int m = xv.dim(1);
  Tensor out({n_out, m});
  for (size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < m; ++j) out.at(rows[i], j) = xv.at(static_cast<int>(i), j);
  return make_op(g, std::move(out), rq, [xi, rows = std::move(rows), m](Graph& gr, int out_idx) {
    const Tensor& go = gr.grad_ref(out_idx);
    Tensor& dx = gr.grad_ref(xi);
    for (size_t i = 0; i < rows.size(); ++i)
      for (int j = 0; j < m; ++j) dx.at(static_cast<int>(i), j) += go.at(rows[i], j);
  });
}

Var row_normalize(Var w, const std::string& context) {
  Graph* g = w.g;
  bool rq = g->needs(w.idx);
  int wi = w.idx;
  const Tensor& wv = w.val();
  int n = wv.dim(0), m = wv.dim(1);
  Tensor out({n, m});
  std::vector<char> fallback(static_cast<size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    double s = 0.0, mx = 0.0;
    for (int j = 0; j < m; ++j) {
      s += wv.at(i, j);
      if (wv.at(i, j) > mx) mx = wv.at(i, j);
    }
    if (!(s > 1e-300)) {
      warn("row_normalize: all-zero weight row " + std::to_string(i) + " in " + context +
           " (max entry " + std::to_string(mx) + "), falling back to uniform weights");
      fallback[static_cast<size_t>(i)] = 1;
      for (int j = 0; j < m; ++j) out.at(i, j) = 1.0 / m;
    } else {
      for (int j = 0; j < m; ++j) out.at(i, j) = wv.at(i, j) / s;
    }
  }
  return make_op(g, std::move(out), rq,
                 [wi, fallback = std::move(fallback), n, m](Graph& gr, int out_idx) {
    const Tensor& go = gr.grad_ref(out_idx);
    const Tensor& wv = gr.value(wi);
    Tensor& dw = gr.grad_ref(wi);
    for (int i = 0; i < n; ++i) {
      if (fallback[static_cast<size_t>(i)]) continue;  // constant row
      double s = 0.0, gdotw = 0.0;
      for (int j = 0; j < m; ++j) s += wv.at(i, j);
      for (int j = 0; j < m; ++j) gdotw += go.at(i, j) * wv.at(i, j);
      double inv = 1.0 / s, inv2 = gdotw / (s * s);
      for (int j = 0; j < m; ++j) dw.at(i, j) += go.at(i, j) * inv - inv2;
    }
  });
}

Var pairwise_sqdist(Var a, Var b) {
  Graph* g = common_graph(a, b);
  bool rq = g->needs(a.idx) || g->needs(b.idx);
  int ai = a.idx, bi = b.idx;
  return make_op(g, pairwise_sqdist(a.val(), b.val()), rq, [ai, bi](Graph& gr, int out) {
    const Tensor& go = gr.grad_ref(out);
    const Tensor& av = gr.value(ai);
    const Tensor& bv = gr.value(bi);
    int n = av.dim(0), m = bv.dim(0), d = av.dim(1);
    bool na = gr.needs(ai), nb = gr.needs(bi);
    Tensor* da = na ? &gr.grad_ref(ai) : nullptr;
    Tensor* db = nb ? &gr.grad_ref(bi) : nullptr;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) {
        double gij = 2.0 * go.at(i, j);
        if (gij == 0.0) continue;
        for (int t = 0; t < d; ++t) {
          double diff = av.at(i, t) - bv.at(j, t);
          if (na) da->at(i, t) += gij * diff;
          if (nb) db->at(j, t) -= gij * diff;
        }
      }
  });
}

Var scale_by(Var x, Var s, double c) {
  Graph* g = common_graph(x, s);
  if (s.val().numel() != 1) throw shape_error("scale_by expects a scalar variable");
  bool rq = g->needs(x.idx) || g->needs(s.idx);
  int xi = x.idx, si = s.idx;
  double sv = s.val().data[0];
  Tensor out = scale(x.val(), c * sv);
  return make_op(g, std::move(out), rq, [xi, si, c](Graph& gr, int out_idx) {
    const Tensor& go = gr.grad_ref(out_idx);
    const Tensor& xv = gr.value(xi);
    double sv = gr.value(si).data[0];
    if (gr.needs(xi)) {
      Tensor& dx = gr.grad_ref(xi);
      for (size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += c * sv * go.data[i];
    }
    if (gr.needs(si)) {
      double acc = 0.0;
      for (size_t i = 0; i < xv.data.size(); ++i) acc += xv.data[i] * go.data[i];
      gr.grad_ref(si).data[0] += c * acc;
    }
  });
}

Var gaussian_sample(Var mean, Var logvar, Tensor eps) {
  Graph* g = common_graph(mean, logvar);
  const Tensor& mv = mean.val();
  const Tensor& lv = logvar.val();
  if (!mv.same_shape(lv) || !mv.same_shape(eps))
    throw shape_error("gaussian_sample shape mismatch");
  bool rq = g->needs(mean.idx) || g->needs(logvar.idx);
  int mi = mean.idx, li = logvar.idx;
  Tensor out = mv;
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] += std::exp(0.5 * lv.data[i]) * eps.data[i];
  return make_op(g, std::move(out), rq, [mi, li, eps = std::move(eps)](Graph& gr, int out_idx) {
    const Tensor& go = gr.grad_ref(out_idx);
    const Tensor& lv = gr.value(li);
    if (gr.needs(mi)) {
      Tensor& dm = gr.grad_ref(mi);
      for (size_t i = 0; i < dm.data.size(); ++i) dm.data[i] += go.data[i];
    }
    if (gr.needs(li)) {
      Tensor& dl = gr.grad_ref(li);
      for (size_t i = 0; i < dl.data.size(); ++i)
        dl.data[i] += go.data[i] * 0.5 * std::exp(0.5 * lv.data[i]) * eps.data[i];
    }
  });
}

Var kl_rows(Var mq, Var lq, Var mp, Var lp) {
  Graph* g = common_graph(mq, lq);
  common_graph(lq, mp);
  common_graph(mp, lp);
  const Tensor& mqv = mq.val();
  if (!mqv.same_shape(lq.val()) || !mqv.same_shape(mp.val()) || !mqv.same_shape(lp.val()))
    throw shape_error("kl_rows shape mismatch");
  int n = mqv.dim(0), d = mqv.dim(1);
  bool rq = g->needs(mq.idx) || g->needs(lq.idx) || g->needs(mp.idx) || g->needs(lp.idx);
  int iq = mq.idx, ilq = lq.idx, ip = mp.idx, ilp = lp.idx;
  Tensor out({n, 1});
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) {
      double dmu = mqv.at(i, j) - mp.val().at(i, j);
      double elq = std::exp(lq.val().at(i, j));
      double elp = std::exp(lp.val().at(i, j));
      s += 0.5 * (lp.val().at(i, j) - lq.val().at(i, j)) +
           (elq + dmu * dmu) / (2.0 * elp) - 0.5;
    }
    out.at(i, 0) = s;
  }
  return make_op(g, std::move(out), rq, [iq, ilq, ip, ilp, n, d](Graph& gr, int out_idx) {
    const Tensor& go = gr.grad_ref(out_idx);
    const Tensor& mqv = gr.value(iq);
    const Tensor& lqv = gr.value(ilq);
    const Tensor& mpv = gr.value(ip);
    const Tensor& lpv = gr.value(ilp);
    bool nq = gr.needs(iq), nlq = gr.needs(ilq), np = gr.needs(ip), nlp = gr.needs(ilp);
    Tensor* dmq = nq ? &gr.grad_ref(iq) : nullptr;
    Tensor* dlq = nlq ? &gr.grad_ref(ilq) : nullptr;
    Tensor* dmp = np ? &gr.grad_ref(ip) : nullptr;
    Tensor* dlp = nlp ? &gr.grad_ref(ilp) : nullptr;
    for (int i = 0; i < n; ++i) {
      double gi = go.at(i, 0);
      if (gi == 0.0) continue;
      for (int j = 0; j < d; ++j) {
        double dmu = mqv.at(i, j) - mpv.at(i, j);
        double elq = std::exp(lqv.at(i, j));
        double elp = std::exp(lpv.at(i, j));
        if (nq) dmq->at(i, j) += gi * dmu / elp;
        if (np) dmp->at(i, j) -= gi * dmu / elp;
        if (nlq) dlq->at(i, j) += gi * 0.5 * (elq / elp - 1.0);
        if (nlp) dlp->at(i, j) += gi * 0.5 * (1.0 - (elq + dmu * dmu) / elp);
      }
    }
  });
}

Var softmax(Var logits) {
  Graph* g = logits.g;
  bool rq = g->needs(logits.idx);
  int li = logits.idx;
  return make_op(g, softmax_rows(logits.val()), rq, [li](Graph& gr, int out) {
    const Tensor& go = gr.grad_ref(out);
    const Tensor& p = gr.value(out);
    Tensor& dl = gr.grad_ref(li);
    int n = p.dim(0), m = p.dim(1);
    for (int i = 0; i < n; ++i) {
      double dot = 0.0;
      for (int j = 0; j < m; ++j) dot += go.at(i, j) * p.at(i, j);
      for (int j = 0; j < m; ++j) dl.at(i, j) += p.at(i, j) * (go.at(i, j) - dot);
    }
  });
}

Var ce_loss(Var probs, const std::vector<int>& labels) {
  Graph* g = probs.g;
  const Tensor& pv = probs.val();
  int n = pv.dim(0), m = pv.dim(1);
  if (static_cast<int>(labels.size()) != n) throw shape_error("ce_loss label count mismatch");
  for (int y : labels)
    if (y < 0 || y >= m) throw data_error("ce_loss label out of range");
  bool rq = g->needs(probs.idx);
  int pi = probs.idx;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc -= std::log(std::max(pv.at(i, labels[static_cast<size_t>(i)]), 1e-12));
  Tensor out({1, 1});
  out.data[0] = acc / n;
  return make_op(g, std::move(out), rq, [pi, labels, n](Graph& gr, int out_idx) {
    double go = gr.grad_ref(out_idx).data[0];
    const Tensor& pv = gr.value(pi);
    Tensor& dp = gr.grad_ref(pi);
    for (int i = 0; i < n; ++i) {
      int y = labels[static_cast<size_t>(i)];
      dp.at(i, y) -= go / (n * std::max(pv.at(i, y), 1e-12));
    }
  });
}

Var bce_logits_mean(Var logits, Tensor targets) {
  Graph* g = logits.g;
  const Tensor& lv = logits.val();
  if (!lv.same_shape(targets)) throw shape_error("bce_logits_mean shape mismatch");
  bool rq = g->needs(logits.idx);
  int li = logits.idx;
  int64_t n = lv.numel();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double x = lv.data[static_cast<size_t>(i)], t = targets.data[static_cast<size_t>(i)];
    acc += std::max(x, 0.0) - t * x + std::log1p(std::exp(-std::fabs(x)));
  }
  Tensor out({1, 1});
  out.data[0] = acc / static_cast<double>(n);
  return make_op(g, std::move(out), rq, [li, targets = std::move(targets), n](Graph& gr, int out_idx) {
    double go = gr.grad_ref(out_idx).data[0];
    const Tensor& lv = gr.value(li);
    Tensor& dl = gr.grad_ref(li);
    for (int64_t i = 0; i < n; ++i) {
      double x = lv.data[static_cast<size_t>(i)];
      double s = 1.0 / (1.0 + std::exp(-x));
      dl.data[static_cast<size_t>(i)] += go * (s - targets.data[static_cast<size_t>(i)]) /
                                          static_cast<double>(n);
    }
  });
}

Var mean_all(Var a) {
  Graph* g = a.g;
  bool rq = g->needs(a.idx);
  int ai = a.idx;
  int64_t n = a.val().numel();
  Tensor out({1, 1});
  out.data[0] = exact_sum(a.val().data.data(), n) / static_cast<double>(n);
  return make_op(g, std::move(out), rq, [ai, n](Graph& gr, int out_idx) {
    double go = gr.grad_ref(out_idx).data[0] / static_cast<double>(n);
    Tensor& da = gr.grad_ref(ai);
    for (size_t i = 0; i < da.data.size(); ++i) da.data[i] += go;
  });
}

Var sum_all(Var a) {
  Graph* g = a.g;
  bool rq = g->needs(a.idx);
  int ai = a.idx;
  Tensor out({1, 1});
  out.data[0] = exact_sum(a.val().data.data(), a.val().numel());
  return make_op(g, std::move(out), rq, [ai](Graph& gr, int out_idx) {
    double go = gr.grad_ref(out_idx).data[0];
    Tensor& da = gr.grad_ref(ai);
    for (size_t i = 0; i < da.data.size(); ++i) da.data[i] += go;
  });
}

Var weighted_sum_all(Var a, Tensor w) {
  Graph* g = a.g;
  const Tensor& av = a.val();
  if (!av.same_shape(w)) throw shape_error("weighted_sum_all shape mismatch");
  bool rq = g->needs(a.idx);
  int ai = a.idx;
  int64_t n = av.numel();
  std::vector<double> prods(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i)
    prods[static_cast<size_t>(i)] = av.data[static_cast<size_t>(i)] * w.data[static_cast<size_t>(i)];
  Tensor out({1, 1});
  out.data[0] = exact_sum(prods.data(), n);
  return make_op(g, std::move(out), rq, [ai, w = std::move(w)](Graph& gr, int out_idx) {
    double go = gr.grad_ref(out_idx).data[0];
    Tensor& da = gr.grad_ref(ai);
    for (size_t i = 0; i < da.data.size(); ++i) da.data[i] += go * w.data[i];
  });
}

Var combine(const std::vector<Var>& terms, const std::vector<double>& coeffs) {
  if (terms.empty() || terms.size() != coeffs.size())
    throw shape_error("combine arity mismatch");
  Graph* g = terms[0].g;
  bool rq = false;
  std::vector<int> idxs;
  idxs.reserve(terms.size());
  for (const Var& t : terms) {
    common_graph(terms[0], t);
    if (t.val().numel() != 1) throw shape_error("combine expects scalar terms");
    rq = rq || g->needs(t.idx);
    idxs.push_back(t.idx);
  }
  double acc = 0.0;
  for (size_t i = 0; i < terms.size(); ++i) acc += coeffs[i] * terms[i].val().data[0];
  Tensor out({1, 1});
  out.data[0] = acc;
  return make_op(g, std::move(out), rq, [idxs, coeffs](Graph& gr, int out_idx) {
    double go = gr.grad_ref(out_idx).data[0];
    for (size_t i = 0; i < idxs.size(); ++i)
      if (gr.needs(idxs[i])) gr.grad_ref(idxs[i]).data[0] += go * coeffs[i];
  });
}

}  // namespace gtnp

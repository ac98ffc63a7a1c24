// Feature extractor, embedding heads, graph construction, and the
// distribution/classifier stage.

#include <doctest.h>

#include <cmath>
#include <vector>

#include "gtnp/embedding.hpp"
#include "gtnp/errors.hpp"
#include "gtnp/graphs.hpp"
#include "gtnp/latent.hpp"
#include "gtnp/random.hpp"

using namespace gtnp;

static bool same_tensor(const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) return false;
  for (size_t i = 0; i < a.data.size(); ++i)
    if (a.data[i] != b.data[i]) return false;
  return true;
}

TEST_CASE("feature extractor shapes and path agreement") {
  RandomStream rng(3);
  FeatureExtractor fx(16, 16, 48, rng);
  CHECK(fx.flat == 16 * 2 * 2);  // 16 -> conv 14 -> pool 7 -> conv 5 -> pool 2

  Tensor x = rng.normal_tensor({5, 1, 16, 16});
  Tensor feats = fx.infer(x);
  CHECK(feats.dim(0) == 5);
  CHECK(feats.dim(1) == 48);

  // Recorded forward matches the value path bit-for-bit.
  Graph g;
  Var rec = fx.forward(g, g.constant(x));
  CHECK(same_tensor(rec.val(), feats));

  CHECK_THROWS_AS(FeatureExtractor(5, 5, 8, rng), shape_error);
}

TEST_CASE("global latent starts standard-normal and augments features") {
  GlobalLatent gl(6);
  for (double v : gl.mean.value.data) CHECK(v == 0.0);
  for (double v : gl.logvar.value.data) CHECK(v == 0.0);  // variance exp(0) = 1

  RandomStream rng(4);
  Tensor feats = rng.normal_tensor({3, 5});
  Tensor z = rng.normal_tensor({1, 6});
  Tensor h = augment_with_global(feats, z);
  CHECK(h.dim(0) == 3);
  CHECK(h.dim(1) == 11);
  CHECK(h.at(2, 4) == feats.at(2, 4));
  CHECK(h.at(0, 5) == z.at(0, 0));
  CHECK(h.at(2, 10) == z.at(0, 5));

  Graph g;
  Var hr = augment_with_global(g.constant(feats), g.constant(z));
  CHECK(same_tensor(hr.val(), h));
}

TEST_CASE("embedding head splits mean and clamped logvar") {
  RandomStream rng(5);
  EmbeddingHead head(7, 4, rng);
  Tensor h = rng.normal_tensor({3, 7});
  auto [mean, logvar] = head.infer(h);
  CHECK(mean.dim(0) == 3);
  CHECK(mean.dim(1) == 4);
  CHECK(logvar.dim(1) == 4);
  for (double v : logvar.data) {
    CHECK(v >= -kLogvarClamp);
    CHECK(v <= kLogvarClamp);
  }

  Graph g;
  auto [mr, lr] = head.forward(g, g.constant(h));
  CHECK(same_tensor(mr.val(), mean));
  CHECK(same_tensor(lr.val(), logvar));

  // Saturating the pre-activation hits the clamp exactly.
  for (auto& v : head.b.value.data) v = 1000.0;
  auto [m2, l2] = head.infer(h);
  for (double v : l2.data) CHECK(v == kLogvarClamp);
}

TEST_CASE("label adjacency marks same-class pairs including the diagonal") {
  Tensor a = label_adjacency({0, 1, 0, 2});
  CHECK(a.at(0, 0) == 1.0);
  CHECK(a.at(0, 2) == 1.0);
  CHECK(a.at(2, 0) == 1.0);
  CHECK(a.at(0, 1) == 0.0);
  CHECK(a.at(1, 3) == 0.0);
  CHECK(a.at(3, 3) == 1.0);
  CHECK_THROWS_AS(label_adjacency({}), data_error);
}

TEST_CASE("adjacency normalization matches the hand 3-node path graph") {
  // Path 0-1-2: degrees with self-loops are 2, 3, 2.
  Tensor a = Tensor::zeros({3, 3});
  a.at(0, 1) = a.at(1, 0) = 1.0;
  a.at(1, 2) = a.at(2, 1) = 1.0;
  Tensor n = normalize_adjacency(a);
  double s6 = 1.0 / std::sqrt(6.0);
  CHECK(std::abs(n.at(0, 0) - 0.5) < 1e-15);
  CHECK(std::abs(n.at(0, 1) - s6) < 1e-15);
  CHECK(n.at(0, 2) == 0.0);
  CHECK(std::abs(n.at(1, 1) - 1.0 / 3.0) < 1e-15);
  CHECK(std::abs(n.at(1, 2) - s6) < 1e-15);
  CHECK(std::abs(n.at(2, 2) - 0.5) < 1e-15);
  CHECK(n.at(1, 0) == n.at(0, 1));

  CHECK_THROWS_AS(normalize_adjacency(Tensor::zeros({2, 3})), shape_error);
  Tensor neg = Tensor::zeros({2, 2});
  neg.at(0, 1) = neg.at(1, 0) = -1.0;  // degree 1 + (-1) = 0
  CHECK_THROWS_AS(normalize_adjacency(neg), numeric_error);
}

TEST_CASE("gcn forward reproduces a hand-computed 3-node example") {
  // Path graph as above, scalar features, hand-set weights.
  Tensor a = Tensor::zeros({3, 3});
  a.at(0, 1) = a.at(1, 0) = 1.0;
  a.at(1, 2) = a.at(2, 1) = 1.0;
  Tensor x({3, 1});
  x.at(0, 0) = 1.0;
  x.at(1, 0) = 2.0;
  x.at(2, 0) = 3.0;

  RandomStream rng(1);
  GcnParams p(1, 1, 2, rng);
  p.w1.value.at(0, 0) = 1.0;
  p.b1.value.data[0] = 0.0;
  p.w2.value.at(0, 0) = 2.0;
  p.b2.value.data[0] = -1.0;

  double s6 = 1.0 / std::sqrt(6.0);
  double h0 = 0.5 * 1.0 + s6 * 2.0;
  double h1 = s6 * 1.0 + (1.0 / 3.0) * 2.0 + s6 * 3.0;
  double h2 = s6 * 2.0 + 0.5 * 3.0;  // all positive, ReLU is identity here
  double o0 = (0.5 * h0 + s6 * h1) * 2.0 - 1.0;
  double o1 = (s6 * h0 + (1.0 / 3.0) * h1 + s6 * h2) * 2.0 - 1.0;
  double o2 = (s6 * h1 + 0.5 * h2) * 2.0 - 1.0;

  Tensor out = gcn_forward(x, a, p);
  REQUIRE(out.dim(0) == 3);
  REQUIRE(out.dim(1) == 1);
  CHECK(std::abs(out.at(0, 0) - o0) <= 1e-12);
  CHECK(std::abs(out.at(1, 0) - o1) <= 1e-12);
  CHECK(std::abs(out.at(2, 0) - o2) <= 1e-12);

  // Recorded overload agrees bitwise.
  Graph g;
  Var rec = gcn_forward(g, g.constant(x), a, p);
  CHECK(same_tensor(rec.val(), out));

  CHECK_THROWS_AS(gcn_forward(Tensor::zeros({2, 1}), a, p), shape_error);
}

TEST_CASE("gcn forward is exactly permutation-equivariant") {
  RandomStream rng(17);
  for (int rep = 0; rep < 25; ++rep) {
    int n = 5, d = 3, hidden = 4;
    GcnParams p(d, hidden, 2, rng);
    Tensor x = rng.normal_tensor({n, d});
    Tensor a = Tensor::zeros({n, n});
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (rng.uniform() < 0.5) a.at(i, j) = a.at(j, i) = 1.0;

    std::vector<int> perm(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
    rng.shuffle(perm);

    Tensor xp({n, d}), ap({n, n});
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < d; ++k) xp.at(i, k) = x.at(perm[static_cast<size_t>(i)], k);
      for (int j = 0; j < n; ++j)
        ap.at(i, j) = a.at(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);
    }

    Tensor out = gcn_forward(x, a, p);
    Tensor outp = gcn_forward(xp, ap, p);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < hidden; ++k)
        CHECK(outp.at(i, k) == out.at(perm[static_cast<size_t>(i)], k));
  }
}

TEST_CASE("edge weights are symmetric averages of directed sigmoid scores") {
  RandomStream rng(9);
  GcnParams p(2, 3, 2, rng);
  Tensor nodes = rng.normal_tensor({4, 3});

  Tensor g = edge_weight_matrix(nodes, p);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      CHECK(g.at(i, j) == g.at(j, i));
      CHECK(g.at(i, j) > 0.0);
      CHECK(g.at(i, j) < 1.0);
    }

  // Matrix entries agree with the scalar op.
  Tensor u0({3}), u2({3});
  for (int k = 0; k < 3; ++k) {
    u0.data[static_cast<size_t>(k)] = nodes.at(0, k);
    u2.data[static_cast<size_t>(k)] = nodes.at(2, k);
  }
  double w02 = edge_weight(u0, u2, p);
  double w20 = edge_weight(u2, u0, p);
  CHECK(g.at(0, 2) == 0.5 * (w02 + w20));

  // Zeroed edge head scores every pair sigmoid(0) = 1/2.
  p.edge_w.value.fill(0.0);
  p.edge_b.value.fill(0.0);
  Tensor flat = edge_weight_matrix(nodes, p);
  for (double v : flat.data) CHECK(v == 0.5);

  CHECK_THROWS_AS(edge_weight(Tensor::zeros({2}), u2, p), shape_error);
  CHECK_THROWS_AS(edge_weight_matrix(Tensor::zeros({4, 2}), p), shape_error);
}

TEST_CASE("bipartite kernel weight is exp of minus half tau distance") {
  Tensor a = Tensor::zeros({2});
  Tensor b = Tensor::zeros({2});
  b.data[0] = 1.0;
  b.data[1] = 1.0;  // squared distance 2
  CHECK(std::abs(bipartite_weight(a, b, 1.0) - std::exp(-1.0)) < 1e-15);
  CHECK(std::abs(bipartite_weight(a, b, 1.0) - 0.367879441171442) < 5e-13);
  CHECK(bipartite_weight(a, a, 1.0) == 1.0);
  CHECK(bipartite_weight(a, b, 2.0) < bipartite_weight(a, b, 1.0));
  CHECK_THROWS_AS(bipartite_weight(a, b, 0.0), numeric_error);
  CHECK_THROWS_AS(bipartite_weight(a, Tensor::zeros({3}), 1.0), shape_error);

  RandomStream rng(6);
  Tensor um = rng.normal_tensor({3, 4});
  Tensor ur = rng.normal_tensor({5, 4});
  Tensor big = build_bipartite(um, ur, 0.7);
  REQUIRE(big.dim(0) == 3);
  REQUIRE(big.dim(1) == 5);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 5; ++j) {
      Tensor ui({4}), uj({4});
      for (int k = 0; k < 4; ++k) {
        ui.data[static_cast<size_t>(k)] = um.at(i, k);
        uj.data[static_cast<size_t>(k)] = ur.at(j, k);
      }
      CHECK(std::abs(big.at(i, j) - bipartite_weight(ui, uj, 0.7)) < 1e-15);
      CHECK(big.at(i, j) > 0.0);
      CHECK(big.at(i, j) <= 1.0);
    }
  CHECK_THROWS_AS(build_bipartite(um, Tensor::zeros({0, 4}), 1.0), data_error);
}

TEST_CASE("one-hot encoding and dependency graph validation") {
  Tensor oh = one_hot({2, 0}, 3);
  CHECK(oh.at(0, 2) == 1.0);
  CHECK(oh.at(0, 0) == 0.0);
  CHECK(oh.at(1, 0) == 1.0);
  CHECK_THROWS_AS(one_hot({3}, 3), data_error);
  CHECK_THROWS_AS(one_hot({-1}, 3), data_error);

  DependencyGraphs graphs;
  graphs.g = Tensor::zeros({2, 2});
  graphs.a = Tensor::zeros({3, 2});
  graphs.a.fill(0.5);
  graphs.validate();
  CHECK(graphs.tau() == 1.0);

  DependencyGraphs bad = graphs;
  bad.g = Tensor::zeros({2, 3});
  CHECK_THROWS_AS(bad.validate(), shape_error);
  bad = graphs;
  bad.g.at(0, 1) = 0.3;  // asymmetric
  CHECK_THROWS_AS(bad.validate(), numeric_error);
  bad = graphs;
  bad.g.at(0, 0) = 1.5;
  CHECK_THROWS_AS(bad.validate(), numeric_error);
  bad = graphs;
  bad.a = Tensor::zeros({3, 4});
  CHECK_THROWS_AS(bad.validate(), shape_error);
}

TEST_CASE("message aggregation weight-normalizes neighbor messages") {
  Tensor msgs({3, 2});
  msgs.at(0, 0) = 1.0;
  msgs.at(0, 1) = 2.0;
  msgs.at(1, 0) = 3.0;
  msgs.at(1, 1) = 4.0;
  msgs.at(2, 0) = 5.0;
  msgs.at(2, 1) = 6.0;

  Tensor row({3});
  row.data = {1.0, 1.0, 2.0};
  Tensor agg = aggregate_messages(row, msgs, "test");
  CHECK(std::abs(agg.at(0, 0) - (1.0 + 3.0 + 10.0) / 4.0) < 1e-15);
  CHECK(std::abs(agg.at(0, 1) - (2.0 + 4.0 + 12.0) / 4.0) < 1e-15);

  // All-zero row falls back to the uniform average.
  Tensor zero = Tensor::zeros({3});
  Tensor uni = aggregate_messages(zero, msgs, "test");
  CHECK(std::abs(uni.at(0, 0) - 3.0) < 1e-15);
  CHECK(std::abs(uni.at(0, 1) - 4.0) < 1e-15);

  CHECK_THROWS_AS(aggregate_messages(Tensor::zeros({2}), msgs, "test"), shape_error);
}

TEST_CASE("graph-conditioned distribution excludes a reference node's own entry") {
  RandomStream rng(12);
  int d_u = 3, classes = 2, hidden = 4, d_z = 2;
  RealDistHead head(d_u, classes, hidden, d_z, rng);
  Tensor u_r = rng.normal_tensor({3, d_u});
  std::vector<int> y_r = {0, 1, 1};

  DependencyGraphs graphs;
  graphs.g = Tensor::zeros({3, 3});
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) graphs.g.at(i, j) = i == j ? 1.0 : 0.25;
  graphs.a = Tensor({2, 3});
  graphs.a.fill(0.5);
  graphs.a.at(0, 1) = 0.9;

  DiagGaussian d0 = real_distribution(0, u_r, y_r, graphs, head);
  CHECK(static_cast<int>(d0.mean.size()) == d_z);

  // Independent recomputation: self weight zeroed, neighbors averaged.
  Tensor msgs = head.messages(u_r, one_hot(y_r, classes));
  Tensor row({3});
  row.data = {0.0, 0.25, 0.25};
  auto [mean, logvar] = head.output(aggregate_messages(row, msgs, "check"));
  for (int k = 0; k < d_z; ++k) {
    CHECK(d0.mean[static_cast<size_t>(k)] == mean.data[static_cast<size_t>(k)]);
    CHECK(d0.logvar[static_cast<size_t>(k)] == logvar.data[static_cast<size_t>(k)]);
  }

  // Modeling nodes use their bipartite row unchanged.
  DiagGaussian dm = real_distribution(3, u_r, y_r, graphs, head);
  Tensor mrow({3});
  mrow.data = {0.5, 0.9, 0.5};
  auto [mm, ml] = head.output(aggregate_messages(mrow, msgs, "check"));
  for (int k = 0; k < d_z; ++k) CHECK(dm.mean[static_cast<size_t>(k)] == mm.data[static_cast<size_t>(k)]);

  CHECK_THROWS_AS(real_distribution(5, u_r, y_r, graphs, head), data_error);
  CHECK_THROWS_AS(real_distribution(-1, u_r, y_r, graphs, head), data_error);
  std::vector<int> short_labels = {0, 1};
  CHECK_THROWS_AS(real_distribution(0, u_r, short_labels, graphs, head), shape_error);
}

TEST_CASE("real head recorded and value paths agree") {
  RandomStream rng(13);
  RealDistHead head(3, 2, 4, 2, rng);
  Tensor u_r = rng.normal_tensor({4, 3});
  Tensor oh = one_hot({0, 1, 0, 1}, 2);

  Tensor msgs = head.messages(u_r, oh);
  Graph g;
  Var msgs_r = head.messages(g, g.constant(u_r), oh);
  CHECK(same_tensor(msgs_r.val(), msgs));

  Tensor agg = aggregate_messages(Tensor::zeros({4}), msgs, "t");
  auto [m, l] = head.output(agg);
  auto [mr, lr] = head.output(g, g.constant(agg));
  CHECK(same_tensor(mr.val(), m));
  CHECK(same_tensor(lr.val(), l));
}

TEST_CASE("amortized head and classifier produce consistent outputs") {
  RandomStream rng(14);
  EstDistHead est(5, 3, rng);
  Tensor u = rng.normal_tensor({2, 5});
  auto [mean, logvar] = est.infer(u);
  CHECK(mean.dim(0) == 2);
  CHECK(mean.dim(1) == 3);

  Graph g;
  auto [mr, lr] = est.forward(g, g.constant(u));
  CHECK(same_tensor(mr.val(), mean));
  CHECK(same_tensor(lr.val(), logvar));

  // Row vector input is accepted by the one-sample wrapper.
  Tensor u1({5});
  for (int k = 0; k < 5; ++k) u1.data[static_cast<size_t>(k)] = u.at(0, k);
  DiagGaussian d1 = estimated_distribution(u1, est);
  for (int k = 0; k < 3; ++k) CHECK(d1.mean[static_cast<size_t>(k)] == mean.at(0, k));
  CHECK_THROWS_AS(estimated_distribution(Tensor::zeros({4}), est), shape_error);

  ClassifierHead cls(3, 5, 4, rng);
  Tensor z = rng.normal_tensor({2, 3});
  Tensor probs = cls.probabilities(z, u);
  CHECK(probs.dim(0) == 2);
  CHECK(probs.dim(1) == 4);
  for (int i = 0; i < 2; ++i) {
    double s = 0.0;
    for (int c = 0; c < 4; ++c) {
      CHECK(probs.at(i, c) > 0.0);
      s += probs.at(i, c);
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
  }

  Graph g2;
  Var logits = cls.logits(g2, g2.constant(z), g2.constant(u));
  Tensor soft = softmax_rows(logits.val());
  CHECK(same_tensor(soft, probs));

  Tensor z1({3});
  for (int k = 0; k < 3; ++k) z1.data[static_cast<size_t>(k)] = z.at(0, k);
  std::vector<double> p1 = classify(z1, u1, cls);
  REQUIRE(p1.size() == 4);
  for (int c = 0; c < 4; ++c) CHECK(p1[static_cast<size_t>(c)] == probs.at(0, c));
}

TEST_CASE("gcn pretraining separates two linearly distinct groups") {
  // Two clusters far apart; the GCN should reach perfect node accuracy fast.
  RandomStream rng(15);
  int n = 12, d = 4;
  Tensor feats({n, d});
  std::vector<int> labels(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    int y = i < n / 2 ? 0 : 1;
    labels[static_cast<size_t>(i)] = y;
    for (int k = 0; k < d; ++k)
      feats.at(i, k) = (y == 0 ? -2.0 : 2.0) + 0.1 * rng.normal();
  }

  PretrainResult res = pretrain_gcn(feats, labels, 2, 8, 60, 0.01, OptMethod::Adam, 5);
  REQUIRE(static_cast<int>(res.trace.size()) == 60);
  CHECK(res.trace.back().node_acc == 1.0);
  CHECK(res.trace.back().node_ce < res.trace.front().node_ce);
  CHECK(res.g.dim(0) == n);
  CHECK(res.g.dim(1) == n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      CHECK(res.g.at(i, j) == res.g.at(j, i));
      CHECK(res.g.at(i, j) >= 0.0);
      CHECK(res.g.at(i, j) <= 1.0);
    }

  // Same-class pairs should end up more strongly connected than cross pairs.
  double same = 0.0, cross = 0.0;
  int ns = 0, nc = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (labels[static_cast<size_t>(i)] == labels[static_cast<size_t>(j)]) {
        same += res.g.at(i, j);
        ++ns;
      } else {
        cross += res.g.at(i, j);
        ++nc;
      }
    }
  CHECK(same / ns > cross / nc);

  std::vector<int> oneclass(static_cast<size_t>(n), 0);
  CHECK_THROWS_AS(pretrain_gcn(feats, oneclass, 2, 8, 5, 0.01, OptMethod::Adam, 5),
                  data_error);
  CHECK_THROWS_AS(pretrain_gcn(feats, {0, 1}, 2, 8, 5, 0.01, OptMethod::Adam, 5),
                  shape_error);
}

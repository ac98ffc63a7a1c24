// Multi-class evaluation: confusion counts, macro averages, ROC curves, and
// the pair-count AUC identity.

#include <doctest.h>

#include <cmath>
#include <vector>

#include "gtnp/errors.hpp"
#include "gtnp/metrics.hpp"
#include "gtnp/random.hpp"
#include "oracles.hpp"

using namespace gtnp;

TEST_CASE("hand-checked confusion example") {
  // labels (0,0,1,1), predictions (0,1,1,1):
  // class 0: prec 1, rec 1/2, f1 2/3; class 1: prec 2/3, rec 1, f1 4/5.
  MetricsReport r = compute_metrics({0, 1, 1, 1}, {0, 0, 1, 1}, 2);
  CHECK(r.accuracy == 0.75);
  CHECK(r.total == 4);
  CHECK(r.per_class[0].precision == 1.0);
  CHECK(r.per_class[0].recall == 0.5);
  CHECK(std::abs(r.per_class[0].f1 - 2.0 / 3.0) < 1e-15);
  CHECK(std::abs(r.per_class[1].precision - 2.0 / 3.0) < 1e-15);
  CHECK(r.per_class[1].recall == 1.0);
  CHECK(std::abs(r.per_class[1].f1 - 0.8) < 1e-15);
  CHECK(std::abs(r.macro_f1 - (2.0 / 3.0 + 0.8) / 2.0) < 1e-15);
  CHECK(std::abs(r.macro_f1 - 0.7333) < 5e-5);
  CHECK(r.per_class[0].support == 2);
  CHECK(r.per_class[1].support == 2);
  CHECK(r.confusion[0][0] == 1);
  CHECK(r.confusion[0][1] == 1);
  CHECK(r.confusion[1][0] == 0);
  CHECK(r.confusion[1][1] == 2);
}

TEST_CASE("perfect and degenerate predictions") {
  MetricsReport perfect = compute_metrics({0, 1, 2}, {0, 1, 2}, 3);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.macro_precision == 1.0);
  CHECK(perfect.macro_recall == 1.0);
  CHECK(perfect.macro_f1 == 1.0);

  // Everything predicted as one class on balanced binary labels.
  MetricsReport onesided = compute_metrics({0, 0, 0, 0}, {0, 0, 1, 1}, 2);
  CHECK(onesided.accuracy == 0.5);
  CHECK(onesided.macro_recall == 0.5);
  // Class 1 has no predictions: zero-denominator precision contributes 0.
  CHECK(onesided.per_class[1].precision == 0.0);
  CHECK(onesided.per_class[1].f1 == 0.0);

  CHECK_THROWS_AS(compute_metrics({}, {}, 2), data_error);
  CHECK_THROWS_AS(compute_metrics({0}, {0, 1}, 2), shape_error);
  CHECK_THROWS_AS(compute_metrics({0}, {2}, 2), data_error);
}

TEST_CASE("macro metrics are invariant under class relabeling") {
  RandomStream rng(41);
  int n = 60, c = 4;
  std::vector<int> labels(static_cast<size_t>(n)), preds(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    labels[static_cast<size_t>(i)] = rng.uniform_int(0, c - 1);
    preds[static_cast<size_t>(i)] = rng.uniform_int(0, c - 1);
  }
  MetricsReport base = compute_metrics(preds, labels, c);

  std::vector<int> perm = {2, 0, 3, 1};
  std::vector<int> labels2(labels), preds2(preds);
  for (auto& v : labels2) v = perm[static_cast<size_t>(v)];
  for (auto& v : preds2) v = perm[static_cast<size_t>(v)];
  MetricsReport moved = compute_metrics(preds2, labels2, c);

  CHECK(moved.accuracy == base.accuracy);
  CHECK(std::abs(moved.macro_precision - base.macro_precision) <= 1e-15);
  CHECK(std::abs(moved.macro_recall - base.macro_recall) <= 1e-15);
  CHECK(std::abs(moved.macro_f1 - base.macro_f1) <= 1e-15);
  // Per-class rows move with the permutation.
  for (int k = 0; k < c; ++k)
    CHECK(moved.per_class[static_cast<size_t>(perm[static_cast<size_t>(k)])].f1 ==
          base.per_class[static_cast<size_t>(k)].f1);
}

static Tensor two_class_scores(const std::vector<double>& pos_scores) {
  Tensor t({static_cast<int>(pos_scores.size()), 2});
  for (size_t i = 0; i < pos_scores.size(); ++i) {
    t.at(static_cast<int>(i), 1) = pos_scores[i];
    t.at(static_cast<int>(i), 0) = 1.0 - pos_scores[i];
  }
  return t;
}

TEST_CASE("roc endpoints, perfect separation, and constant scores") {
  // One-hot scores equal to the labels: AUC 1 for both classes.
  std::vector<int> labels = {0, 1, 1, 0};
  Tensor onehot = two_class_scores({0.0, 1.0, 1.0, 0.0});
  auto curves = roc_auc(onehot, labels);
  REQUIRE(curves.size() == 2);
  for (const auto& c : curves) {
    REQUIRE(c.valid);
    CHECK(c.auc == 1.0);
    CHECK(c.fpr.front() == 0.0);
    CHECK(c.tpr.front() == 0.0);
    CHECK(c.fpr.back() == 1.0);
    CHECK(c.tpr.back() == 1.0);
    for (size_t i = 1; i < c.fpr.size(); ++i) CHECK(c.fpr[i] >= c.fpr[i - 1]);
  }

  // Constant scores collapse to the single tie group: AUC exactly 0.5.
  Tensor flat = two_class_scores({0.5, 0.5, 0.5, 0.5});
  auto flat_curves = roc_auc(flat, labels);
  CHECK(flat_curves[0].auc == 0.5);
  CHECK(flat_curves[1].auc == 0.5);

  // A class with no positives is invalid, the other still computes.
  std::vector<int> onlyzero = {0, 0, 0, 0};
  auto degenerate = roc_auc(onehot, onlyzero);
  CHECK_FALSE(degenerate[1].valid);
  CHECK(degenerate[0].valid);

  CHECK_THROWS_AS(roc_auc(Tensor::zeros({0, 2}), std::vector<int>{}), data_error);
}

TEST_CASE("trapezoidal auc equals the mann-whitney pair count") {
  RandomStream rng(42);
  for (int rep = 0; rep < 30; ++rep) {
    int n = rng.uniform_int(5, 60);
    std::vector<int> labels(static_cast<size_t>(n));
    std::vector<double> pos(static_cast<size_t>(n));
    bool has0 = false, has1 = false;
    for (int i = 0; i < n; ++i) {
      labels[static_cast<size_t>(i)] = rng.uniform() < 0.4 ? 1 : 0;
      // Quantize some scores to force ties.
      double s = rng.uniform();
      if (rng.uniform() < 0.5) s = std::round(s * 4.0) / 4.0;
      pos[static_cast<size_t>(i)] = s;
      (labels[static_cast<size_t>(i)] ? has1 : has0) = true;
    }
    if (!has0 || !has1) continue;

    auto curves = roc_auc(two_class_scores(pos), labels);
    REQUIRE(curves[1].valid);
    std::vector<char> is_pos(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
      is_pos[static_cast<size_t>(i)] = labels[static_cast<size_t>(i)] == 1;
    double oracle_auc = oracle::auc_pair_count(pos, is_pos);
    CHECK(std::abs(curves[1].auc - oracle_auc) <= 1e-9);
  }
}

TEST_CASE("auc is invariant under strictly monotone score transforms") {
  RandomStream rng(43);
  int n = 40;
  std::vector<int> labels(static_cast<size_t>(n));
  std::vector<double> pos(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    labels[static_cast<size_t>(i)] = i % 3 == 0 ? 1 : 0;
    pos[static_cast<size_t>(i)] = rng.uniform();
  }
  double base = roc_auc(two_class_scores(pos), labels)[1].auc;

  auto transformed = [&](double (*f)(double)) {
    // Build a score matrix whose positive-class column is f(pos); the other
    // column only needs to be some complement, ROC reads one column at a time.
    Tensor t({n, 2});
    for (int i = 0; i < n; ++i) {
      t.at(i, 1) = f(pos[static_cast<size_t>(i)]);
      t.at(i, 0) = -f(pos[static_cast<size_t>(i)]);
    }
    return roc_auc(t, labels)[1].auc;
  };
  CHECK(transformed([](double x) { return std::exp(x); }) == base);
  CHECK(transformed([](double x) { return 3.0 * x - 7.0; }) == base);
  CHECK(transformed([](double x) { return std::atan(x); }) == base);
}

// Objective terms: distribution KL, cross-entropy with probability floor, the
// Gram-form MMD statistic against a brute-force oracle, and the weighted total.

#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "gtnp/autograd.hpp"
#include "gtnp/errors.hpp"
#include "gtnp/gaussians.hpp"
#include "gtnp/gradcheck.hpp"
#include "gtnp/losses.hpp"
#include "gtnp/random.hpp"
#include "gtnp/tensor.hpp"
#include "oracles.hpp"

using namespace gtnp;

TEST_CASE("gram-form mmd matches the double-loop oracle") {
  RandomStream rng(31);
  MmdConfig fixed;
  fixed.median_heuristic = false;

  for (int rep = 0; rep < 20; ++rep) {
    int n_s = rng.uniform_int(2, 12);
    int n_t = rng.uniform_int(2, 12);
    int d = rng.uniform_int(1, 6);
    Tensor us = rng.normal_tensor({n_s, d});
    Tensor ut = rng.normal_tensor({n_t, d});
    for (auto& v : ut.data) v += 0.5;

    fixed.fixed_sigma = 0.5 + rng.uniform() * 2.0;
    double got = mmd_loss(us, ut, fixed);
    double want = oracle::mmd2_double_loop(us, ut, fixed.fixed_sigma);
    CHECK(std::abs(got - want) <= 1e-10);
    CHECK(got >= -1e-12);  // biased statistic is non-negative

    // Median-heuristic path agrees with the oracle at the oracle's own sigma.
    MmdConfig med;
    double sigma = mmd_median_sigma(us, ut);
    CHECK(std::abs(mmd_loss(us, ut, med) - oracle::mmd2_double_loop(us, ut, sigma)) <=
          1e-10);
  }
}

TEST_CASE("mmd of a set against itself is numerically zero") {
  RandomStream rng(32);
  MmdConfig cfg;
  for (int rep = 0; rep < 5; ++rep) {
    Tensor x = rng.normal_tensor({rng.uniform_int(2, 20), rng.uniform_int(1, 8)});
    CHECK(std::abs(mmd_loss(x, x, cfg)) <= 1e-12);
  }
}

TEST_CASE("median sigma pools both sets and averages even-count middles") {
  // Four 1-d points: 0, 1 (source), 3, 7 (target).
  // Pairwise distances: 1, 3, 7, 2, 6, 4 -> sorted 1 2 3 4 6 7, median 3.5.
  Tensor us({2, 1}), ut({2, 1});
  us.at(0, 0) = 0.0;
  us.at(1, 0) = 1.0;
  ut.at(0, 0) = 3.0;
  ut.at(1, 0) = 7.0;
  CHECK(mmd_median_sigma(us, ut) == 3.5);
  CHECK(mmd_median_sigma(us, ut) == oracle::median_pairwise_distance(us, ut));

  // Identical rows floor the bandwidth instead of collapsing to zero.
  Tensor same({2, 1});
  same.fill(2.0);
  CHECK(mmd_median_sigma(same, same) == 1e-6);

  MmdConfig bad;
  bad.median_heuristic = false;
  bad.fixed_sigma = 0.0;
  CHECK_THROWS_AS(mmd_loss(us, ut, bad), config_error);
  CHECK_THROWS_AS(mmd_loss(Tensor::zeros({1, 1}), ut, MmdConfig{}), data_error);
  CHECK_THROWS_AS(mmd_loss(us, Tensor::zeros({2, 2}), MmdConfig{}), shape_error);
}

TEST_CASE("mmd coefficient matrix carries the three block weights") {
  Tensor m = mmd_coefficients(2, 3);
  CHECK(m.at(0, 0) == 0.25);
  CHECK(m.at(0, 1) == 0.25);
  CHECK(m.at(2, 2) == 1.0 / 9.0);
  CHECK(m.at(4, 3) == 1.0 / 9.0);
  CHECK(m.at(0, 2) == -1.0 / 6.0);
  CHECK(m.at(3, 1) == -1.0 / 6.0);
  double total = 0.0;
  for (double v : m.data) total += v;
  CHECK(std::abs(total) < 1e-15);  // blocks cancel exactly in expectation form
}

TEST_CASE("recorded mmd agrees with the value path and its gradients check out") {
  RandomStream rng(33);
  Tensor us = rng.normal_tensor({4, 3});
  Tensor ut = rng.normal_tensor({5, 3});
  for (auto& v : ut.data) v += 0.3;

  for (bool median : {false, true}) {
    MmdConfig cfg;
    cfg.median_heuristic = median;
    cfg.fixed_sigma = 1.3;
    Graph g;
    Var rec = mmd_loss(g.constant(us), g.constant(ut), cfg);
    CHECK(std::abs(rec.scalar() - mmd_loss(us, ut, cfg)) <= 1e-14);
  }

  // Finite differences on every embedding coordinate (fixed sigma so the
  // bandwidth does not depend on the perturbed point).
  MmdConfig cfg;
  cfg.median_heuristic = false;
  cfg.fixed_sigma = 1.1;
  size_t n_par = us.data.size() + ut.data.size();
  auto unpack = [&](const std::vector<double>& x) {
    Tensor a = us, b = ut;
    std::copy(x.begin(), x.begin() + a.data.size(), a.data.begin());
    std::copy(x.begin() + a.data.size(), x.end(), b.data.begin());
    return std::pair<Tensor, Tensor>(a, b);
  };
  GradProbe probe;
  probe.value = [&](const std::vector<double>& x) {
    auto [a, b] = unpack(x);
    return mmd_loss(a, b, cfg);
  };
  probe.gradient = [&](const std::vector<double>& x) {
    auto [a, b] = unpack(x);
    Parameter pa("a", a), pb("b", b);
    Graph g;
    g.backward(mmd_loss(g.param(pa), g.param(pb), cfg));
    std::vector<double> out;
    for (double v : pa.grad.data) out.push_back(v);
    for (double v : pb.grad.data) out.push_back(v);
    return out;
  };
  std::vector<double> point;
  for (double v : us.data) point.push_back(v);
  for (double v : ut.data) point.push_back(v);
  REQUIRE(point.size() == n_par);
  CHECK(gradient_check(probe, point, 1e-6) < 1e-7);
}

TEST_CASE("classification loss floors probabilities inside the log") {
  Tensor p({2, 2});
  p.at(0, 0) = 0.25;
  p.at(0, 1) = 0.75;
  p.at(1, 0) = 0.5;
  p.at(1, 1) = 0.5;
  double want = 0.5 * (-std::log(0.25) - std::log(0.5));
  CHECK(std::abs(classification_loss(p, {0, 1}) - want) < 1e-15);

  // An exact zero at the true label costs -log(1e-12), not infinity.
  Tensor z({1, 2});
  z.at(0, 0) = 0.0;
  z.at(0, 1) = 1.0;
  CHECK(std::abs(classification_loss(z, {0}) - (-std::log(1e-12))) < 1e-9);
  CHECK(std::isfinite(classification_loss(z, {0})));

  CHECK_THROWS_AS(classification_loss(p, {0}), shape_error);
  CHECK_THROWS_AS(classification_loss(p, {0, 2}), data_error);
}

TEST_CASE("distribution loss averages per-sample gaussian KLs") {
  DiagGaussian std2, shifted, wide;
  std2.mean = {0.0, 0.0};
  std2.logvar = {0.0, 0.0};
  shifted.mean = {1.0, 1.0};
  shifted.logvar = {0.0, 0.0};
  wide.mean = {0.0, 0.0};
  wide.logvar = {std::log(4.0), std::log(4.0)};

  // KL(N(0,1) || N(1,1)) = 0.5 per dimension.
  CHECK(std::abs(distribution_loss({std2}, {shifted}) - 1.0) <= 1e-12);
  // KL(N(0,4) || N(0,1)) = 0.806853 per dimension.
  CHECK(std::abs(distribution_loss({wide}, {std2}) - 2.0 * 0.806853) < 1e-5);
  CHECK(distribution_loss({std2, wide}, {shifted, std2}) ==
        doctest::Approx(0.5 * (1.0 + 2.0 * 0.8068528194400547)).epsilon(1e-12));
  CHECK(std::abs(distribution_loss({std2}, {std2})) <= 1e-12);

  CHECK_THROWS_AS(distribution_loss({}, {}), shape_error);
  CHECK_THROWS_AS(distribution_loss({std2}, {std2, wide}), shape_error);
}

TEST_CASE("recorded KL rows match the closed-form scalar") {
  RandomStream rng(34);
  int n = 4, d = 3;
  Tensor mq = rng.normal_tensor({n, d}), lq = rng.normal_tensor({n, d});
  Tensor mp = rng.normal_tensor({n, d}), lp = rng.normal_tensor({n, d});

  Graph g;
  Var rows = distribution_kl_rows(g.constant(mq), g.constant(lq), g.constant(mp),
                                  g.constant(lp));
  REQUIRE(rows.val().dim(0) == n);
  REQUIRE(rows.val().dim(1) == 1);
  for (int i = 0; i < n; ++i) {
    DiagGaussian q, p;
    for (int k = 0; k < d; ++k) {
      q.mean.push_back(mq.at(i, k));
      q.logvar.push_back(lq.at(i, k));
      p.mean.push_back(mp.at(i, k));
      p.logvar.push_back(lp.at(i, k));
    }
    CHECK(std::abs(rows.val().at(i, 0) - kl_diag_gaussians(q, p)) <= 1e-12);
  }
}

TEST_CASE("total loss applies weights and names non-finite terms") {
  LossWeights w;
  w.lambda_mmd = 2.0;
  w.amplitude = 0.1;
  LossBreakdown b = total_loss(1.0, 2.0, 3.0, 4.0, 5.0, 6.0, w);
  CHECK(b.total == doctest::Approx(1.0 + 2.0 + 3.0 + 4.0 + 2.0 * 5.0 + 0.1 * 6.0));
  CHECK(b.mmd == 5.0);
  CHECK(b.weights.lambda_mmd == 2.0);

  double nan = std::nan("");
  CHECK_THROWS_WITH_AS(total_loss(nan, 0, 0, 0, 0, 0, w),
                       doctest::Contains("dist_source"), numeric_error);
  CHECK_THROWS_WITH_AS(total_loss(0, 0, 0, 0, nan, 0, w), doctest::Contains("mmd"),
                       numeric_error);
  double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_WITH_AS(total_loss(0, 0, 0, inf, 0, 0, w),
                       doctest::Contains("cls_target"), numeric_error);
}

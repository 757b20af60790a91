#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hfdp/metrics.hpp"

using namespace hfdp;
using Catch::Approx;

namespace {

MatrixXi counts2(std::initializer_list<std::initializer_list<int>> rows) {
  MatrixXi m(static_cast<Eigen::Index>(rows.size()),
             static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    Eigen::Index j = 0;
    for (int v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

double scalar_normal_logpdf(double x, double mu, double var) {
  return -0.5 * std::log(2.0 * M_PI * var) - 0.5 * (x - mu) * (x - mu) / var;
}

}  // namespace

TEST_CASE("balance follows the pairwise ratio definition", "[metrics]") {
  auto one = balance(ContingencyTable::from_counts(counts2({{3}, {4}})));
  REQUIRE(one.per_cluster[0] == Approx(0.75));
  REQUIRE(one.overall == Approx(0.75));

  auto missing = balance(ContingencyTable::from_counts(counts2({{5}, {0}})));
  REQUIRE(missing.overall == 0.0);

  auto two = balance(ContingencyTable::from_counts(counts2({{3, 1}, {4, 1}})));
  REQUIRE(two.per_cluster[0] == Approx(0.75));
  REQUIRE(two.per_cluster[1] == Approx(1.0));
  REQUIRE(two.overall == Approx(0.75));
}

TEST_CASE("balance skips empty clusters and handles one attribute level", "[metrics]") {
  auto res = balance(ContingencyTable::from_counts(counts2({{3, 0}, {4, 0}})));
  REQUIRE(res.occupied[0]);
  REQUIRE_FALSE(res.occupied[1]);
  REQUIRE(res.overall == Approx(0.75));

  auto single = balance(ContingencyTable::from_counts(counts2({{5, 3}})));
  REQUIRE(single.overall == Approx(1.0));

  REQUIRE_THROWS_AS(balance(ContingencyTable::from_counts(MatrixXi::Zero(2, 2))),
                    invalid_input);
}

TEST_CASE("three-level balance takes the worst pair", "[metrics]") {
  // one cluster, label counts (2, 4, 8): worst pair ratio 2/8
  auto res = balance(ContingencyTable::from_counts(counts2({{2}, {4}, {8}})));
  REQUIRE(res.overall == Approx(0.25));
}

TEST_CASE("mi pivot matches the direct summation oracle", "[metrics]") {
  REQUIRE(mi_pivot(ContingencyTable::from_counts(counts2({{2, 2}, {2, 2}}))) == 0.0);
  REQUIRE(std::isinf(mi_pivot(ContingencyTable::from_counts(counts2({{2, 0}, {0, 2}})))));

  double got = mi_pivot(ContingencyTable::from_counts(counts2({{3, 1}, {1, 3}})));
  // four cells: p_a p_z = 1/4, joints 3/8 and 1/8
  double want = 2.0 * 0.25 * std::log(0.25 / (3.0 / 8.0)) + 2.0 * 0.25 * std::log(0.25 / 0.125);
  REQUIRE(got == Approx(want).epsilon(1e-12));
  REQUIRE(got == Approx(0.5 * std::log(4.0 / 3.0)).epsilon(1e-12));
  REQUIRE(got == Approx(0.14384103622589045).epsilon(1e-12));
}

TEST_CASE("mi pivot ignores zero-marginal rows and is scale invariant", "[metrics]") {
  double base = mi_pivot(ContingencyTable::from_counts(counts2({{3, 1}, {1, 3}})));
  double padded = mi_pivot(ContingencyTable::from_counts(counts2({{3, 1}, {1, 3}, {0, 0}})));
  REQUIRE(padded == Approx(base).epsilon(1e-12));
  double scaled = mi_pivot(ContingencyTable::from_counts(counts2({{9, 3}, {3, 9}})));
  REQUIRE(scaled == Approx(base).epsilon(1e-12));
}

TEST_CASE("balance and mi pivot are invariant to relabeling", "[metrics]") {
  auto t = ContingencyTable::from_counts(counts2({{5, 2, 1}, {3, 3, 2}}));
  auto tr = ContingencyTable::from_counts(counts2({{3, 3, 2}, {5, 2, 1}}));        // swap rows
  auto tc = ContingencyTable::from_counts(counts2({{1, 5, 2}, {2, 3, 3}}));        // rotate cols
  REQUIRE(mi_pivot(tr) == Approx(mi_pivot(t)).epsilon(1e-12));
  REQUIRE(mi_pivot(tc) == Approx(mi_pivot(t)).epsilon(1e-12));
  REQUIRE(balance(tr).overall == Approx(balance(t).overall).epsilon(1e-12));
  REQUIRE(balance(tc).overall == Approx(balance(t).overall).epsilon(1e-12));
}

TEST_CASE("product tables factorize and perturbed ones do not", "[metrics]") {
  Rng rng(321);
  for (int trial = 0; trial < 50; ++trial) {
    int r = std::uniform_int_distribution<int>(2, 4)(rng);
    int K = std::uniform_int_distribution<int>(2, 4)(rng);
    VectorXi u(r), v(K);
    for (int a = 0; a < r; ++a) u[a] = std::uniform_int_distribution<int>(1, 6)(rng);
    for (int k = 0; k < K; ++k) v[k] = std::uniform_int_distribution<int>(1, 6)(rng);
    MatrixXi c = u * v.transpose();
    REQUIRE(mi_pivot(ContingencyTable::from_counts(c)) <= 1e-12);
    c(0, 0) += c.sum();  // break independence hard
    REQUIRE(mi_pivot(ContingencyTable::from_counts(c)) > 1e-6);
  }
}

TEST_CASE("fair set membership follows the pivot threshold", "[metrics]") {
  auto skew = ContingencyTable::from_counts(counts2({{3, 1}, {1, 3}}));
  REQUIRE_FALSE(epsilon_fair_set_check(skew, 0.1));
  REQUIRE(epsilon_fair_set_check(skew, 0.15));
  auto flat = ContingencyTable::from_counts(counts2({{2, 2}, {2, 2}}));
  REQUIRE(epsilon_fair_set_check(flat, 0.0));
}

TEST_CASE("fair score is -inf exactly outside the fair set", "[metrics]") {
  MatrixXd pts(8, 1);
  pts << 0, 1, 2, 3, 10, 11, 12, 13;
  std::vector<int> labels = {0, 0, 0, 0, 1, 1, 1, 1};
  auto ds = LabeledDataset::create(pts, labels, 2);
  std::vector<int> z = {0, 0, 0, 1, 0, 1, 1, 1};  // counts [[3,1],[1,3]]

  REQUIRE(fair_score(z, ds, 0.1) == -kInf);
  double s = fair_score(z, ds, 0.15);
  REQUIRE(std::isfinite(s));

  auto rep1 = build_fairness_report(z, ds, 0.1);
  REQUIRE_FALSE(rep1.epsilon_ok);
  REQUIRE(rep1.fair_score == -kInf);
  auto rep2 = build_fairness_report(z, ds, 0.15);
  REQUIRE(rep2.epsilon_ok);
  REQUIRE(rep2.fair_score == Approx(s));
  REQUIRE(rep2.mi == Approx(0.14384103622589045).epsilon(1e-12));
}

TEST_CASE("fair score matches a scalar hand computation", "[metrics]") {
  MatrixXd pts(12, 1);
  pts << 0, 0.5, 2, 10, 10.5, 12, 1, 1.5, 3, 9, 9.5, 11;
  std::vector<int> labels = {0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1};
  std::vector<int> z = {0, 0, 0, 1, 1, 1, 0, 0, 0, 1, 1, 1};
  auto ds = LabeledDataset::create(pts, labels, 2);

  double want = 12.0 * std::log(0.5)   // class probabilities: all cells 3 of 6
              + 12.0 * std::log(0.5);  // attribute frequencies: 6 of 12 each
  for (int a = 0; a < 2; ++a) {
    for (int k = 0; k < 2; ++k) {
      std::vector<double> xs;
      for (int i = 0; i < 12; ++i)
        if (labels[i] == a && z[i] == k) xs.push_back(pts(i, 0));
      double mu = (xs[0] + xs[1] + xs[2]) / 3.0;
      double var = 0.0;
      for (double x : xs) var += (x - mu) * (x - mu);
      var /= 3.0;
      var += 1e-6 * var;  // ridge at d=1
      for (double x : xs) want += scalar_normal_logpdf(x, mu, var);
    }
  }
  REQUIRE(fair_score(z, ds, 1.0) == Approx(want).epsilon(1e-10));
}

TEST_CASE("small clusters borrow the pooled attribute covariance", "[metrics]") {
  MatrixXd pts(9, 1);
  pts << 0, 1, 5, 6, 7, 8, 2, 3, 7;
  std::vector<int> labels = {0, 0, 0, 0, 0, 0, 1, 1, 1};
  std::vector<int> z = {0, 0, 1, 1, 1, 1, 0, 0, 1};  // counts [[2,4],[2,1]]
  auto ds = LabeledDataset::create(pts, labels, 2);

  double want = 0.0;
  // class probabilities and attribute frequencies
  want += 2 * std::log(2.0 / 6.0) + 4 * std::log(4.0 / 6.0);
  want += 2 * std::log(2.0 / 3.0) + 1 * std::log(1.0 / 3.0);
  want += 6 * std::log(6.0 / 9.0) + 3 * std::log(3.0 / 9.0);
  // attribute 0, cluster 0: two members -> pooled covariance of all six points
  {
    std::vector<double> grp = {0, 1, 5, 6, 7, 8};
    double pm = 27.0 / 6.0;
    double pooled = 0.0;
    for (double x : grp) pooled += (x - pm) * (x - pm);
    pooled /= 6.0;
    pooled += 1e-6 * pooled;
    want += scalar_normal_logpdf(0, 0.5, pooled) + scalar_normal_logpdf(1, 0.5, pooled);
  }
  // attribute 0, cluster 1: four members -> own MLE fit
  {
    std::vector<double> xs = {5, 6, 7, 8};
    double mu = 6.5, var = 0.0;
    for (double x : xs) var += (x - mu) * (x - mu);
    var /= 4.0;
    var += 1e-6 * var;
    for (double x : xs) want += scalar_normal_logpdf(x, mu, var);
  }
  // attribute 1: pooled covariance of {2,3,7} serves both small clusters
  {
    double pm = 4.0;
    double pooled = (4.0 + 1.0 + 9.0) / 3.0;
    pooled += 1e-6 * pooled;
    want += scalar_normal_logpdf(2, 2.5, pooled) + scalar_normal_logpdf(3, 2.5, pooled);
    want += scalar_normal_logpdf(7, 7.0, pooled);
    (void)pm;
  }
  REQUIRE(fair_score(z, ds, 10.0) == Approx(want).epsilon(1e-10));
}

TEST_CASE("random assignment flips lower the fair score on separable data", "[metrics]") {
  Rng rng(99);
  const int n_per = 40;
  MatrixXd pts(4 * n_per, 1);
  std::vector<int> labels, z_true;
  std::normal_distribution<double> noise(0.0, 1.0);
  int row = 0;
  for (int a = 0; a < 2; ++a) {
    for (int k = 0; k < 2; ++k) {
      for (int i = 0; i < n_per; ++i) {
        pts(row++, 0) = (k == 0 ? -6.0 : 6.0) + noise(rng);
        labels.push_back(a);
        z_true.push_back(k);
      }
    }
  }
  auto ds = LabeledDataset::create(pts, labels, 2);
  double s_true = fair_score(z_true, ds, 100.0);

  for (int rep = 0; rep < 20; ++rep) {
    auto z_flip = z_true;
    for (auto& v : z_flip)
      if (uniform01(rng) < 0.10) v = 1 - v;
    REQUIRE(fair_score(z_flip, ds, 100.0) < s_true);
  }
}

TEST_CASE("fair score rejects an absurd inferred cluster count", "[metrics]") {
  MatrixXd pts(2, 1);
  pts << 0, 1;
  auto ds = LabeledDataset::create(pts, {0, 1}, 2);
  std::vector<int> z = {0, 999};
  REQUIRE_THROWS_AS(fair_score(z, ds, 1.0, 128), invalid_input);
  REQUIRE_THROWS_AS(fair_score({0, -1}, ds, 1.0), invalid_input);
}

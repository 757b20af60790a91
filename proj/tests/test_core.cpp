#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "hfdp/core.hpp"

using namespace hfdp;
using Catch::Approx;

namespace {

VectorXd vec(std::initializer_list<double> xs) {
  VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

// d=1 collapsed marginal written out with scalar arithmetic only, as an
// independent oracle for the matrix-based implementation.
double scalar_marginal(const std::vector<double>& xs, double mu0, double lam0, double L0,
                       double nu0) {
  const int m = static_cast<int>(xs.size());
  double xbar = std::accumulate(xs.begin(), xs.end(), 0.0) / m;
  double sc = 0.0;
  for (double x : xs) sc += (x - xbar) * (x - xbar);
  const double lam = lam0 + m;
  const double nu = nu0 + m;
  const double L = L0 + sc + lam0 * m / (lam0 + m) * (xbar - mu0) * (xbar - mu0);
  return std::lgamma(0.5 * nu) - std::lgamma(0.5 * nu0) +
         0.5 * (std::log(lam0) - std::log(lam)) + 0.5 * nu0 * std::log(L0) -
         0.5 * nu * std::log(L);
}

NiwParams prior2d() {
  NiwParams p;
  p.mu0 = vec({0.5, -1.0});
  p.lambda0 = 2.0;
  p.nu0 = 5.0;
  p.Lambda0 = MatrixXd(2, 2);
  p.Lambda0 << 2.0, 0.3, 0.3, 1.5;
  return p;
}

}  // namespace

TEST_CASE("rd matches hand-computed allocations", "[core]") {
  REQUIRE(rd(10, vec({0.26, 0.74})) == std::vector<int>{3, 7});
  REQUIRE(rd(4, vec({0.5, 0.5})) == std::vector<int>{2, 2});
  REQUIRE(rd(7, vec({1.0})) == std::vector<int>{7});
  // repair case: half-up gives (2,2,2,0) with remainder -1; the largest-excess
  // rule removes one item from the lowest tied index
  REQUIRE(rd(5, vec({0.3, 0.3, 0.3, 0.05, 0.05})) == std::vector<int>{1, 2, 2, 0, 0});
  REQUIRE(rd(3, vec({0.5, 0.5, 0.0})) == std::vector<int>{1, 2, 0});
}

TEST_CASE("rd repair keeps the total and nonnegativity", "[core]") {
  Rng rng(1234);
  for (int trial = 0; trial < 300; ++trial) {
    int t = std::uniform_int_distribution<int>(1, 50)(rng);
    int n = std::uniform_int_distribution<int>(1, 10000)(rng);
    double conc = std::uniform_real_distribution<double>(0.02, 5.0)(rng);
    VectorXd u = dirichlet_draw(VectorXd::Constant(t, conc), rng);
    auto v = rd(n, u);
    REQUIRE(static_cast<int>(v.size()) == t);
    long long sum = 0;
    for (int x : v) {
      REQUIRE(x >= 0);
      sum += x;
    }
    REQUIRE(sum == n);
    REQUIRE(rd(n, u) == v);  // deterministic
  }
}

TEST_CASE("rd rejects bad input", "[core]") {
  REQUIRE_THROWS_AS(rd(0, vec({0.5, 0.5})), invalid_input);
  REQUIRE_THROWS_AS(rd(5, vec({0.5, 0.4})), invalid_input);
  REQUIRE_THROWS_AS(rd(5, vec({1.2, -0.2})), invalid_input);
}

TEST_CASE("dataset construction validates rows and labels", "[core]") {
  MatrixXd pts(4, 2);
  pts << 0, 0, 1, 1, 2, 2, 3, 3;
  auto ds = LabeledDataset::create(pts, {0, 1, 0, 1}, 2);
  REQUIRE(ds.n() == 4);
  REQUIRE(ds.dim() == 2);
  REQUIRE(ds.count(0) == 2);
  REQUIRE(ds.rows_of[1] == std::vector<int>{1, 3});
  REQUIRE(ds.points_of(1).row(0)(0) == 1.0);

  REQUIRE_THROWS_AS(LabeledDataset::create(pts, {0, 1, 0, 2}, 2), invalid_input);
  REQUIRE_THROWS_AS(LabeledDataset::create(pts, {0, 0, 0, 0}, 2), invalid_input);
  REQUIRE_THROWS_AS(LabeledDataset::create(pts, {0, 1, 0}, 2), invalid_input);
  MatrixXd bad = pts;
  bad(1, 1) = std::nan("");
  REQUIRE_THROWS_AS(LabeledDataset::create(bad, {0, 1, 0, 1}, 2), invalid_input);
}

TEST_CASE("niw posterior update matches the hand example", "[core]") {
  NiwParams prior;
  prior.mu0 = vec({0.0});
  prior.lambda0 = 1.0;
  prior.nu0 = 3.0;
  prior.Lambda0 = MatrixXd::Constant(1, 1, 1.0);

  ClusterSufficientStats s;
  s.count = 1;
  s.mean = vec({2.0});
  s.scatter = MatrixXd::Zero(1, 1);

  auto post = niw_posterior_params(prior, s);
  REQUIRE(post.lambda0 == Approx(2.0));
  REQUIRE(post.nu0 == Approx(4.0));
  REQUIRE(post.mu0(0) == Approx(1.0));
  REQUIRE(post.Lambda0(0, 0) == Approx(3.0));
}

TEST_CASE("niw posterior with empty stats is the prior", "[core]") {
  auto prior = prior2d();
  ClusterSufficientStats s;
  s.count = 0;
  s.mean = VectorXd::Zero(2);
  s.scatter = MatrixXd::Zero(2, 2);
  auto post = niw_posterior_params(prior, s);
  REQUIRE(post.lambda0 == prior.lambda0);
  REQUIRE(post.nu0 == prior.nu0);
  REQUIRE(post.mu0.isApprox(prior.mu0));
  REQUIRE(post.Lambda0.isApprox(prior.Lambda0));
}

TEST_CASE("niw posterior is translation equivariant", "[core]") {
  auto prior = prior2d();
  MatrixXd pts(5, 2);
  pts << 1, 2, -1, 0.5, 3, 3, 0, 0, 2, -2;
  std::vector<int> z(5, 0);
  auto stats = compute_stats(pts, z, 1);
  auto post = niw_posterior_params(prior, stats[0]);

  VectorXd c = vec({3.5, -2.25});
  auto shifted_prior = prior;
  shifted_prior.mu0 += c;
  MatrixXd pts2 = pts;
  pts2.rowwise() += c.transpose();
  auto post2 = niw_posterior_params(shifted_prior, compute_stats(pts2, z, 1)[0]);

  REQUIRE(post2.mu0.isApprox(post.mu0 + c, 1e-9));
  REQUIRE(post2.Lambda0.isApprox(post.Lambda0, 1e-9));
  REQUIRE(post2.Lambda0.isApprox(post2.Lambda0.transpose(), 1e-12));
}

TEST_CASE("log marginal matches the scalar formula in one dimension", "[core]") {
  NiwParams prior;
  prior.mu0 = vec({0.5});
  prior.lambda0 = 2.0;
  prior.nu0 = 4.0;
  prior.Lambda0 = MatrixXd::Constant(1, 1, 3.0);

  std::vector<double> xs = {1.2, -0.7, 2.4, 0.1};
  MatrixXd pts(4, 1);
  for (int i = 0; i < 4; ++i) pts(i, 0) = xs[i];
  std::vector<int> z(4, 0);

  double got = log_marginal_z(pts, z, 2, prior);
  double want = scalar_marginal(xs, 0.5, 2.0, 3.0, 4.0);
  REQUIRE(got == Approx(want).epsilon(1e-10));
  REQUIRE(std::isfinite(got));
}

TEST_CASE("log marginal is invariant to order, relabeling and empty clusters", "[core]") {
  auto prior = prior2d();
  Rng rng(77);
  MatrixXd pts(12, 2);
  std::normal_distribution<double> gauss(0.0, 2.0);
  for (int i = 0; i < 12; ++i) {
    pts(i, 0) = gauss(rng);
    pts(i, 1) = gauss(rng);
  }
  std::vector<int> z = {0, 1, 0, 1, 1, 0, 2, 2, 0, 1, 2, 0};

  double base = log_marginal_z(pts, z, 3, prior);

  // permute rows within clusters (swap members of cluster 0 and of cluster 1)
  MatrixXd pts2 = pts;
  pts2.row(0).swap(pts2.row(5));
  pts2.row(1).swap(pts2.row(4));
  REQUIRE(log_marginal_z(pts2, z, 3, prior) == Approx(base).epsilon(1e-12));

  // relabel clusters 0 <-> 2
  std::vector<int> zr = z;
  for (auto& v : zr) v = (v == 0) ? 2 : (v == 2 ? 0 : v);
  REQUIRE(log_marginal_z(pts, zr, 3, prior) == Approx(base).epsilon(1e-12));

  // appending an empty cluster changes nothing
  REQUIRE(log_marginal_z(pts, z, 4, prior) == Approx(base).epsilon(1e-12));
}

TEST_CASE("failed factorizations surface as degeneracy errors with context", "[core]") {
  MatrixXd zero = MatrixXd::Zero(2, 2);
  try {
    spd_log_det(zero, 0.0, 3, 1);
    FAIL("expected numerical_degeneracy");
  } catch (const numerical_degeneracy& e) {
    REQUIRE(e.attribute() == 3);
    REQUIRE(e.cluster() == 1);
  }
  // a jittered retry rescues the same matrix
  double v = spd_log_det(zero, 1e-9, 3, 1);
  REQUIRE(std::isfinite(v));
}

TEST_CASE("log multivariate gamma matches low-dimensional identities", "[core]") {
  REQUIRE(log_multi_gamma(1, 2.7) == Approx(std::lgamma(2.7)).epsilon(1e-12));
  double x = 3.2;
  double want = 0.5 * std::log(M_PI) + std::lgamma(x) + std::lgamma(x - 0.5);
  REQUIRE(log_multi_gamma(2, x) == Approx(want).epsilon(1e-12));
}

TEST_CASE("prior state draws satisfy the chain invariants", "[core]") {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    HfdpConfig cfg;
    cfg.K = std::uniform_int_distribution<int>(2, 6)(rng);
    cfg.g = std::uniform_real_distribution<double>(0.2, 10.0)(rng);
    cfg.b = std::uniform_real_distribution<double>(0.05, 5.0)(rng);
    int r = std::uniform_int_distribution<int>(1, 4)(rng);
    std::vector<int> counts(r);
    for (auto& c : counts) c = std::uniform_int_distribution<int>(1, 50)(rng);
    auto st = sample_prior_state(cfg, counts, rng);
    REQUIRE_NOTHROW(st.check_invariants(counts, cfg.K));
  }
}

TEST_CASE("alpha0 marginal mean matches the gamma prior", "[core]") {
  HfdpConfig cfg;
  cfg.K = 2;
  cfg.g = 2.0;
  cfg.b = 1.0;
  Rng rng(5);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += gamma_draw(cfg.g, cfg.b, rng);
  REQUIRE(sum / n == Approx(2.0).margin(0.05));
}

TEST_CASE("large alpha0 concentrates group weights near beta", "[core]") {
  HfdpConfig cfg;
  cfg.K = 3;
  cfg.g = 2.0;
  cfg.b = 1e-4;  // alpha0 around 2e4
  Rng rng(11);
  std::vector<int> counts = {20};
  double dev = 0.0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    auto st = sample_prior_state(cfg, counts, rng);
    dev += (st.w.row(0).transpose() - st.beta).cwiseAbs().mean();
  }
  REQUIRE(dev / n < 0.05);
}

TEST_CASE("inverse wishart draws have the right mean", "[core]") {
  NiwParams prior;
  prior.mu0 = vec({0.0});
  prior.lambda0 = 1.0;
  prior.nu0 = 3.0;
  prior.Lambda0 = MatrixXd::Constant(1, 1, 1.0);
  Rng rng(42);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += inverse_wishart_draw(prior.Lambda0, prior.nu0, rng)(0, 0);
  REQUIRE(sum / n == Approx(1.0).margin(0.05));  // Lambda0/(nu0 - d - 1)
}

TEST_CASE("component draws degenerate to mu0 as lambda0 grows", "[core]") {
  auto prior = prior2d();
  prior.lambda0 = 1e12;
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    auto p = sample_component_params(prior, rng);
    REQUIRE((p.mu - prior.mu0).cwiseAbs().maxCoeff() < 1e-4);
    Eigen::LLT<MatrixXd> llt(p.sigma);
    REQUIRE(llt.info() == Eigen::Success);
  }
}

TEST_CASE("component draws cover every attribute and cluster", "[core]") {
  HfdpConfig cfg;
  cfg.K = 3;
  cfg.set_shared_niw(prior2d(), 2);
  Rng rng(30);
  auto all = sample_all_component_params(cfg, rng);
  REQUIRE(all.size() == 2);
  for (const auto& row : all) {
    REQUIRE(row.size() == 3);
    for (const auto& p : row) {
      REQUIRE(p.mu.size() == 2);
      Eigen::LLT<MatrixXd> llt(p.sigma);
      REQUIRE(llt.info() == Eigen::Success);
    }
  }
}

TEST_CASE("mvn density matches the scalar normal in one dimension", "[core]") {
  MvnDensity d(vec({1.5}), MatrixXd::Constant(1, 1, 4.0));
  double x = 2.7;
  double want = -0.5 * std::log(2.0 * M_PI * 4.0) - 0.5 * (x - 1.5) * (x - 1.5) / 4.0;
  REQUIRE(d.log_pdf(vec({x})) == Approx(want).epsilon(1e-12));
}

TEST_CASE("config validation rejects malformed settings", "[core]") {
  HfdpConfig cfg;
  cfg.set_shared_niw(prior2d(), 2);
  REQUIRE_NOTHROW(cfg.validate(2, 2));

  auto bad = cfg;
  bad.K = 1;
  REQUIRE_THROWS_AS(bad.validate(2, 2), invalid_input);
  bad = cfg;
  bad.g = 0.0;
  REQUIRE_THROWS_AS(bad.validate(2, 2), invalid_input);
  bad = cfg;
  bad.burnin = bad.iterations;
  REQUIRE_THROWS_AS(bad.validate(2, 2), invalid_input);
  bad = cfg;
  bad.niw.pop_back();
  REQUIRE_THROWS_AS(bad.validate(2, 2), invalid_input);
  bad = cfg;
  bad.niw[0].nu0 = 0.5;
  REQUIRE_THROWS_AS(bad.validate(2, 2), invalid_input);
}

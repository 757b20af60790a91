#pragma once

// Model types and the conjugate Gaussian component machinery: datasets with a
// protected attribute, prior configuration, chain state, rounded-allocation
// occupancies, and collapsed normal-inverse-Wishart marginals.

#include <algorithm>
#include <numeric>
#include <optional>
#include <utility>

#include "hfdp/common.hpp"

namespace hfdp {

struct NiwParams {
  VectorXd mu0;
  double lambda0 = 1.0;
  MatrixXd Lambda0;
  double nu0 = 0.0;

  int dim() const { return static_cast<int>(mu0.size()); }

  void validate() const {
    const int d = dim();
    if (d == 0) throw invalid_input("NIW prior: mu0 must be non-empty");
    if (!(lambda0 > 0.0)) throw invalid_input("NIW prior: lambda0 must be positive");
    if (!(nu0 > d - 1)) throw invalid_input("NIW prior: nu0 must exceed dim - 1");
    if (Lambda0.rows() != d || Lambda0.cols() != d)
      throw invalid_input("NIW prior: Lambda0 shape must match mu0");
    if (!Lambda0.isApprox(Lambda0.transpose(), 1e-10))
      throw invalid_input("NIW prior: Lambda0 must be symmetric");
    Eigen::LLT<MatrixXd> llt(Lambda0);
    if (llt.info() != Eigen::Success)
      throw invalid_input("NIW prior: Lambda0 must be positive definite");
  }

  // A weakly-informative default centered on the data.
  static NiwParams data_driven(const MatrixXd& points) {
    NiwParams p;
    const int d = static_cast<int>(points.cols());
    p.mu0 = points.colwise().mean();
    p.lambda0 = 1.0;
    p.nu0 = d + 2;
    MatrixXd centered = points.rowwise() - p.mu0.transpose();
    MatrixXd cov = centered.transpose() * centered / std::max<int>(1, points.rows());
    double tr = cov.trace();
    if (!(tr > 0.0)) tr = 1.0;
    p.Lambda0 = cov + 1e-6 * (tr / d) * MatrixXd::Identity(d, d);
    return p;
  }
};

struct LabeledDataset {
  MatrixXd points;          // N x d feature rows
  std::vector<int> labels;  // attribute level per row, values in [0, r)
  int r = 0;
  std::vector<std::vector<int>> rows_of;  // attribute level -> row indices

  static LabeledDataset create(MatrixXd points, std::vector<int> labels, int r) {
    LabeledDataset ds;
    if (points.rows() == 0 || points.cols() == 0)
      throw invalid_input("dataset must have at least one row and one feature");
    if (static_cast<std::size_t>(points.rows()) != labels.size())
      throw invalid_input("dataset labels must match the number of rows");
    if (r < 1) throw invalid_input("dataset needs at least one attribute level");
    if (!points.allFinite()) throw invalid_input("dataset features must be finite");
    ds.rows_of.assign(r, {});
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0 || labels[i] >= r)
        throw invalid_input("dataset label out of range at row " + std::to_string(i));
      ds.rows_of[labels[i]].push_back(static_cast<int>(i));
    }
    for (int a = 0; a < r; ++a) {
      if (ds.rows_of[a].empty())
        throw invalid_input("attribute level " + std::to_string(a) + " has no rows");
    }
    ds.points = std::move(points);
    ds.labels = std::move(labels);
    ds.r = r;
    return ds;
  }

  int n() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
  int count(int a) const { return static_cast<int>(rows_of[a].size()); }

  // Feature rows for one attribute level, in row order.
  MatrixXd points_of(int a) const {
    MatrixXd x(count(a), dim());
    for (int i = 0; i < count(a); ++i) x.row(i) = points.row(rows_of[a][i]);
    return x;
  }
};

struct HfdpConfig {
  int K = 2;
  double g = 1.0;
  double b = 1.0;
  double epsilon = 0.05;
  std::vector<NiwParams> niw;  // one per attribute level
  int iterations = 1000;
  int burnin = 500;  // half the run
  int thin = 5;
  std::uint64_t seed = 0;
  int wrla_steps = -1;  // < 0 means the 50 * N_a default per attribute
  double alpha0_step = 0.5;
  bool strict_z = false;

  void set_shared_niw(const NiwParams& p, int r) { niw.assign(r, p); }

  void validate(int d, int r) const {
    if (K < 2) throw invalid_input("config: K must be >= 2");
    if (!(g > 0.0)) throw invalid_input("config: g must be positive");
    if (!(b > 0.0)) throw invalid_input("config: b must be positive");
    if (!(epsilon >= 0.0)) throw invalid_input("config: epsilon must be >= 0");
    if (iterations < 1) throw invalid_input("config: iterations must be >= 1");
    if (burnin < 0 || burnin >= iterations)
      throw invalid_input("config: burnin must be in [0, iterations)");
    if (thin < 1) throw invalid_input("config: thin must be >= 1");
    if (static_cast<int>(niw.size()) != r)
      throw invalid_input("config: need one NIW prior per attribute level");
    for (const auto& p : niw) {
      p.validate();
      if (p.dim() != d) throw invalid_input("config: NIW prior dimension must match data");
    }
  }
};

// Rounded allocation of n items to the cells of a probability vector u:
// round-half-up everywhere except the last cell, which takes the remainder;
// if the remainder is negative, walk it back from the cells with the largest
// rounding excess (ties to the lowest index).
inline std::vector<int> rd(int n, const VectorXd& u) {
  if (n < 1) throw invalid_input("rd: n must be >= 1");
  require_probability_vector(u, "rd: u");
  const int t = static_cast<int>(u.size());
  std::vector<int> v(t, 0);
  if (t == 1) {
    v[0] = n;
    return v;
  }
  long long head = 0;
  for (int i = 0; i + 1 < t; ++i) {
    v[i] = static_cast<int>(std::floor(n * u[i] + 0.5));
    head += v[i];
  }
  long long last = static_cast<long long>(n) - head;
  while (last < 0) {
    int best = -1;
    double best_excess = -kInf;
    for (int i = 0; i + 1 < t; ++i) {
      if (v[i] == 0) continue;
      double excess = v[i] - n * u[i];
      if (excess > best_excess) {
        best_excess = excess;
        best = i;
      }
    }
    if (best < 0) throw numerical_degeneracy("rd: cannot repair allocation", -1, -1);
    --v[best];
    ++last;
  }
  v[t - 1] = static_cast<int>(last);
  return v;
}

struct ClusterSufficientStats {
  int count = 0;
  VectorXd mean;
  MatrixXd scatter;
};

// Per-cluster count, mean and centered scatter for an assignment vector.
inline std::vector<ClusterSufficientStats> compute_stats(const MatrixXd& points,
                                                         const std::vector<int>& z, int K) {
  const int d = static_cast<int>(points.cols());
  if (static_cast<Eigen::Index>(z.size()) != points.rows())
    throw invalid_input("compute_stats: assignment length must match rows");
  std::vector<ClusterSufficientStats> s(K);
  for (auto& sk : s) {
    sk.mean = VectorXd::Zero(d);
    sk.scatter = MatrixXd::Zero(d, d);
  }
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z[i] < 0 || z[i] >= K) throw invalid_input("compute_stats: cluster index out of range");
    auto& sk = s[z[i]];
    ++sk.count;
    sk.mean += points.row(static_cast<int>(i)).transpose();
  }
  for (auto& sk : s)
    if (sk.count > 0) sk.mean /= sk.count;
  for (std::size_t i = 0; i < z.size(); ++i) {
    auto& sk = s[z[i]];
    VectorXd c = points.row(static_cast<int>(i)).transpose() - sk.mean;
    sk.scatter += c * c.transpose();
  }
  return s;
}

inline NiwParams niw_posterior_params(const NiwParams& prior, const ClusterSufficientStats& s) {
  NiwParams post;
  const double m = s.count;
  post.lambda0 = prior.lambda0 + m;
  post.nu0 = prior.nu0 + m;
  if (s.count == 0) {
    post.mu0 = prior.mu0;
    post.Lambda0 = prior.Lambda0;
    return post;
  }
  post.mu0 = (prior.lambda0 * prior.mu0 + m * s.mean) / (prior.lambda0 + m);
  VectorXd dm = s.mean - prior.mu0;
  post.Lambda0 = prior.Lambda0 + s.scatter +
                 (prior.lambda0 * m / (prior.lambda0 + m)) * (dm * dm.transpose());
  return post;
}

// Log-determinant through Cholesky; one jittered retry before giving up.
inline double spd_log_det(const MatrixXd& A, double jitter_scale, int attribute, int cluster) {
  Eigen::LLT<MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) {
    const int d = static_cast<int>(A.rows());
    MatrixXd fixed = A + jitter_scale * MatrixXd::Identity(d, d);
    llt.compute(fixed);
    if (llt.info() != Eigen::Success)
      throw numerical_degeneracy("Cholesky factorization failed", attribute, cluster);
  }
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

// Collapsed marginal likelihood of one attribute group's assignment under the
// NIW prior, components integrated out.  Empty clusters contribute nothing.
inline double log_marginal_z(const MatrixXd& points, const std::vector<int>& z, int K,
                             const NiwParams& prior, int attribute = -1) {
  const int d = static_cast<int>(points.cols());
  const double jitter = 1e-9 * prior.Lambda0.trace() / d;
  const double logdet0 = spd_log_det(prior.Lambda0, jitter, attribute, -1);
  auto stats = compute_stats(points, z, K);
  double total = 0.0;
  for (int k = 0; k < K; ++k) {
    const auto& s = stats[k];
    if (s.count == 0) continue;
    NiwParams post = niw_posterior_params(prior, s);
    const double logdetk = spd_log_det(post.Lambda0, jitter, attribute, k);
    total += log_multi_gamma(d, 0.5 * post.nu0) - log_multi_gamma(d, 0.5 * prior.nu0) +
             0.5 * d * (std::log(prior.lambda0) - std::log(post.lambda0)) +
             0.5 * prior.nu0 * logdet0 - 0.5 * post.nu0 * logdetk;
  }
  return total;
}

struct GaussianParams {
  VectorXd mu;
  MatrixXd sigma;
};

// Cached Cholesky evaluator for a multivariate normal density.
class MvnDensity {
 public:
  MvnDensity(VectorXd mu, const MatrixXd& sigma, int attribute = -1, int cluster = -1)
      : mu_(std::move(mu)) {
    llt_.compute(sigma);
    if (llt_.info() != Eigen::Success) {
      const int d = static_cast<int>(sigma.rows());
      double tr = sigma.trace();
      MatrixXd fixed = sigma + 1e-9 * (tr > 0 ? tr / d : 1.0) * MatrixXd::Identity(d, d);
      llt_.compute(fixed);
      if (llt_.info() != Eigen::Success)
        throw numerical_degeneracy("covariance is not positive definite", attribute, cluster);
    }
    log_det_ = 2.0 * llt_.matrixL().toDenseMatrix().diagonal().array().log().sum();
  }

  double log_pdf(const VectorXd& x) const {
    const int d = static_cast<int>(mu_.size());
    VectorXd c = x - mu_;
    double q = llt_.matrixL().solve(c).squaredNorm();
    return -0.5 * (d * std::log(2.0 * M_PI) + log_det_ + q);
  }

 private:
  VectorXd mu_;
  Eigen::LLT<MatrixXd> llt_;
  double log_det_ = 0.0;
};

// One draw from the inverse Wishart IW(Lambda0, nu0) via the Bartlett
// decomposition of the corresponding Wishart on the precision.
inline MatrixXd inverse_wishart_draw(const MatrixXd& Lambda0, double nu0, Rng& rng) {
  const int d = static_cast<int>(Lambda0.rows());
  Eigen::LLT<MatrixXd> llt(Lambda0.inverse());
  if (llt.info() != Eigen::Success)
    throw numerical_degeneracy("inverse Wishart scale is not positive definite", -1, -1);
  MatrixXd L = llt.matrixL();
  MatrixXd A = MatrixXd::Zero(d, d);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < d; ++i) {
    std::gamma_distribution<double> chi(0.5 * (nu0 - i), 2.0);
    A(i, i) = std::sqrt(chi(rng));
    for (int j = 0; j < i; ++j) A(i, j) = gauss(rng);
  }
  MatrixXd M = L * A;  // precision W = M M^T ~ Wishart(nu0, Lambda0^{-1})
  MatrixXd Minv = M.triangularView<Eigen::Lower>().solve(MatrixXd::Identity(d, d));
  return Minv.transpose() * Minv;
}

inline GaussianParams sample_component_params(const NiwParams& prior, Rng& rng) {
  GaussianParams p;
  p.sigma = inverse_wishart_draw(prior.Lambda0, prior.nu0, rng);
  Eigen::LLT<MatrixXd> llt(p.sigma / prior.lambda0);
  const int d = prior.dim();
  VectorXd zv(d);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < d; ++i) zv[i] = gauss(rng);
  p.mu = prior.mu0 + llt.matrixL() * zv;
  return p;
}

// All (a,k) component parameters drawn from the per-attribute NIW priors.
inline std::vector<std::vector<GaussianParams>> sample_all_component_params(const HfdpConfig& cfg,
                                                                            Rng& rng) {
  std::vector<std::vector<GaussianParams>> out(cfg.niw.size());
  for (std::size_t a = 0; a < cfg.niw.size(); ++a) {
    out[a].reserve(cfg.K);
    for (int k = 0; k < cfg.K; ++k) out[a].push_back(sample_component_params(cfg.niw[a], rng));
  }
  return out;
}

struct ChainState {
  double alpha0 = 1.0;
  VectorXd beta;                   // K-simplex
  MatrixXd w;                      // r x K, rows on the simplex
  MatrixXi m;                      // r x K occupancy counts
  std::vector<std::vector<int>> z; // per attribute level, cluster index per row

  void check_invariants(const std::vector<int>& counts, int K) const {
    const int r = static_cast<int>(counts.size());
    if (!(alpha0 > 0.0) || !std::isfinite(alpha0))
      throw std::logic_error("chain state: alpha0 must be positive finite");
    if (beta.size() != K || !is_probability_vector(beta))
      throw std::logic_error("chain state: beta must be a K-simplex point");
    if (w.rows() != r || w.cols() != K)
      throw std::logic_error("chain state: w must be r x K");
    for (int a = 0; a < r; ++a) {
      if (!is_probability_vector(w.row(a).transpose()))
        throw std::logic_error("chain state: each w row must lie on the simplex");
    }
    if (m.rows() != r || m.cols() != K)
      throw std::logic_error("chain state: m must be r x K");
    if (static_cast<int>(z.size()) != r)
      throw std::logic_error("chain state: z must have one block per attribute level");
    for (int a = 0; a < r; ++a) {
      if ((m.row(a).array() < 0).any())
        throw std::logic_error("chain state: occupancy counts must be nonnegative");
      if (m.row(a).sum() != counts[a])
        throw std::logic_error("chain state: occupancy must sum to the group size");
      if (static_cast<int>(z[a].size()) != counts[a])
        throw std::logic_error("chain state: z block length must match the group size");
      std::vector<int> occ(K, 0);
      for (int zi : z[a]) {
        if (zi < 0 || zi >= K) throw std::logic_error("chain state: z out of range");
        ++occ[zi];
      }
      for (int k = 0; k < K; ++k)
        if (occ[k] != m(a, k))
          throw std::logic_error("chain state: z occupancy must match m");
    }
  }
};

// Uniform arrangement of cluster labels with a fixed occupancy vector.
inline std::vector<int> shuffled_assignment(const std::vector<int>& occupancy, Rng& rng) {
  std::vector<int> z;
  for (std::size_t k = 0; k < occupancy.size(); ++k)
    z.insert(z.end(), occupancy[k], static_cast<int>(k));
  std::shuffle(z.begin(), z.end(), rng);
  return z;
}

// Forward draw of (alpha0, beta, w, m, z) from the hierarchical prior.
inline ChainState sample_prior_state(const HfdpConfig& cfg, const std::vector<int>& counts,
                                     Rng& rng) {
  const int K = cfg.K;
  const int r = static_cast<int>(counts.size());
  ChainState st;
  st.alpha0 = gamma_draw(cfg.g, cfg.b, rng);
  st.beta = dirichlet_draw(VectorXd::Constant(K, cfg.g / K), rng);
  st.w.resize(r, K);
  st.m.resize(r, K);
  st.z.resize(r);
  for (int a = 0; a < r; ++a) {
    VectorXd wa = dirichlet_draw(st.alpha0 * st.beta, rng);
    st.w.row(a) = wa.transpose();
    std::vector<int> ma = rd(counts[a], wa);
    for (int k = 0; k < K; ++k) st.m(a, k) = ma[k];
    st.z[a] = shuffled_assignment(ma, rng);
  }
  return st;
}

}  // namespace hfdp

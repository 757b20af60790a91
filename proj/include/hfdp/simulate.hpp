#pragma once

// Synthetic benchmark generators: two-cluster planar designs with Gaussian,
// heavy-tailed (Student t) or skew-normal noise, a four-group variant, and
// the imperfect-attribute corruption scheme with its belief matrix.

#include "hfdp/sampler.hpp"

namespace hfdp {

enum class NoiseFamily { gaussian, student_t, skew_normal };

struct GeneratorSpec {
  NoiseFamily noise = NoiseFamily::gaussian;
  int r = 2;                  // attribute levels
  int n_per_attribute = 200;
  double rho = 0.3;
  double scale = 3.0;
  double t_dof = 4.0;
  VectorXd skew;              // defaults to all ones when empty
  double p_acc = 1.0;         // keep-probability of each observed label

  void validate() const {
    if (r < 2) throw invalid_input("generator: need at least two attribute levels");
    if (n_per_attribute < 2) throw invalid_input("generator: need at least two points per level");
    if (!(rho > -1.0 && rho < 1.0)) throw invalid_input("generator: rho must be in (-1, 1)");
    if (!(scale > 0.0)) throw invalid_input("generator: scale must be positive");
    if (!(t_dof > 2.0)) throw invalid_input("generator: t dof must exceed 2");
    if (!(p_acc > 0.0 && p_acc <= 1.0)) throw invalid_input("generator: p_acc must be in (0, 1]");
  }

  // cluster k, attribute level a
  VectorXd mean(int a, int k) const {
    return VectorXd::Constant(2, 4.0 - 2.0 * a + 6.0 * k);
  }

  MatrixXd covariance() const {
    MatrixXd s(2, 2);
    s << 1.0, rho, rho, 1.0;
    return scale * s;
  }
};

struct SimulatedData {
  LabeledDataset data;          // observed labels
  std::vector<int> true_z;
  std::vector<int> true_labels;
  AttributeBeliefs beliefs;     // keep-probability rows when p_acc < 1
};

namespace detail {

inline VectorXd std_normal_vec(int d, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  VectorXd z(d);
  for (int i = 0; i < d; ++i) z[i] = gauss(rng);
  return z;
}

inline VectorXd skew_normal_draw(const VectorXd& xi, const MatrixXd& omega, const VectorXd& alpha,
                                 Rng& rng) {
  const int d = static_cast<int>(xi.size());
  VectorXd sd = omega.diagonal().array().sqrt();
  MatrixXd corr = omega.array() / (sd * sd.transpose()).array();
  VectorXd ca = corr * alpha;
  VectorXd delta = ca / std::sqrt(1.0 + alpha.dot(ca));
  MatrixXd big(d + 1, d + 1);
  big(0, 0) = 1.0;
  big.block(0, 1, 1, d) = delta.transpose();
  big.block(1, 0, d, 1) = delta;
  big.block(1, 1, d, d) = corr;
  Eigen::LLT<MatrixXd> llt(big);
  if (llt.info() != Eigen::Success)
    throw numerical_degeneracy("skew-normal latent covariance is not positive definite", -1, -1);
  VectorXd y = llt.matrixL() * std_normal_vec(d + 1, rng);
  VectorXd w = y.tail(d);
  if (y[0] <= 0.0) w = -w;
  return xi + sd.cwiseProduct(w);
}

}  // namespace detail

inline SimulatedData generate(const GeneratorSpec& spec, Rng& rng) {
  spec.validate();
  const int n = spec.r * spec.n_per_attribute;
  MatrixXd points(n, 2);
  std::vector<int> labels, z;
  labels.reserve(n);
  z.reserve(n);

  MatrixXd cov = spec.covariance();
  Eigen::LLT<MatrixXd> llt(cov);
  MatrixXd chol = llt.matrixL();
  VectorXd alpha = spec.skew.size() == 2 ? spec.skew : VectorXd::Ones(2);

  int row = 0;
  for (int a = 0; a < spec.r; ++a) {
    const int n0 = (spec.n_per_attribute + 1) / 2;  // equal split, remainder to cluster 0
    for (int i = 0; i < spec.n_per_attribute; ++i) {
      const int k = i < n0 ? 0 : 1;
      VectorXd mu = spec.mean(a, k);
      VectorXd x;
      switch (spec.noise) {
        case NoiseFamily::gaussian:
          x = mu + chol * detail::std_normal_vec(2, rng);
          break;
        case NoiseFamily::student_t: {
          std::gamma_distribution<double> chi(0.5 * spec.t_dof, 2.0);
          x = mu + chol * detail::std_normal_vec(2, rng) / std::sqrt(chi(rng) / spec.t_dof);
          break;
        }
        case NoiseFamily::skew_normal:
          x = detail::skew_normal_draw(mu, cov, alpha, rng);
          break;
      }
      points.row(row++) = x.transpose();
      labels.push_back(a);
      z.push_back(k);
    }
  }

  SimulatedData out;
  out.true_z = z;
  out.true_labels = labels;

  std::vector<int> observed = labels;
  if (spec.p_acc < 1.0) {
    for (int i = 0; i < n; ++i) {
      if (uniform01(rng) >= spec.p_acc) {
        int shift = std::uniform_int_distribution<int>(1, spec.r - 1)(rng);
        observed[i] = (observed[i] + shift) % spec.r;
      }
    }
    out.beliefs.probs = MatrixXd::Constant(n, spec.r, (1.0 - spec.p_acc) / (spec.r - 1));
    for (int i = 0; i < n; ++i) out.beliefs.probs(i, observed[i]) = spec.p_acc;
  }
  out.data = LabeledDataset::create(std::move(points), std::move(observed), spec.r);
  return out;
}

}  // namespace hfdp

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hfdp {

using Rng = std::mt19937_64;

using Eigen::MatrixXd;
using Eigen::MatrixXi;
using Eigen::VectorXd;
using Eigen::VectorXi;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSimplexTol = 1e-10;
constexpr double kLogFloor = 1e-300;

// Bad user-supplied data or configuration.
class invalid_input : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numeric routine left its domain of reliability (failed factorization,
// stalled rejection sampler, ...).  Carries the indices it happened at.
class numerical_degeneracy : public std::runtime_error {
 public:
  numerical_degeneracy(const std::string& what, int attribute, int cluster)
      : std::runtime_error(what), attribute_(attribute), cluster_(cluster) {}
  int attribute() const { return attribute_; }
  int cluster() const { return cluster_; }

 private:
  int attribute_;
  int cluster_;
};

// An exact/enumerative routine was asked for more than its guard allows.
class capacity_error : public std::length_error {
 public:
  using std::length_error::length_error;
};

inline bool is_probability_vector(const VectorXd& u, double tol = kSimplexTol) {
  if (u.size() == 0) return false;
  if ((u.array() < 0.0).any()) return false;
  return std::abs(u.sum() - 1.0) <= tol;
}

inline void require_probability_vector(const VectorXd& u, const char* name) {
  if (!is_probability_vector(u)) {
    std::ostringstream os;
    os << name << " must be a probability vector (nonnegative, summing to 1 within "
       << kSimplexTol << ")";
    throw invalid_input(os.str());
  }
}

inline double logistic(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

// log(x) with the argument floored at kLogFloor so zeros stay finite.
inline double floored_log(double x) { return std::log(x < kLogFloor ? kLogFloor : x); }

inline double log_sum_exp(const std::vector<double>& v) {
  double m = -kInf;
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double gamma_draw(double shape, double rate, Rng& rng) {
  std::gamma_distribution<double> d(shape, 1.0 / rate);
  return d(rng);
}

inline VectorXd dirichlet_draw(const VectorXd& conc, Rng& rng) {
  VectorXd x(conc.size());
  for (Eigen::Index i = 0; i < conc.size(); ++i) {
    std::gamma_distribution<double> d(conc[i], 1.0);
    x[i] = d(rng);
  }
  double s = x.sum();
  if (s <= 0.0) {
    // All shapes underflowed; fall back to the uniform vertex mixture.
    int i = std::uniform_int_distribution<int>(0, static_cast<int>(conc.size()) - 1)(rng);
    x.setZero();
    x[i] = 1.0;
    return x;
  }
  return x / s;
}

// log Gamma_d(x), the multivariate gamma function.
inline double log_multi_gamma(int d, double x) {
  double v = 0.25 * d * (d - 1) * std::log(M_PI);
  for (int j = 1; j <= d; ++j) v += std::lgamma(x + 0.5 * (1 - j));
  return v;
}

}  // namespace hfdp

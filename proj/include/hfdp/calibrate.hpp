#pragma once

// Prior-calibration utilities: forward simulation of the weight prior to map
// (g, b) onto the induced balance distribution, and the exact occupancy pmf
// comparison between the rounded-weight prior and the Beta-Binomial.

#include <algorithm>
#include <array>
#include <cmath>
#include <iostream>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "hfdp/common.hpp"
#include "hfdp/core.hpp"

namespace hfdp {

struct CalibrationRow {
  double g = 0.0;
  double b = 0.0;
  std::array<double, 5> balance_q{};  // 5/25/50/75/95 percent
  std::array<double, 5> kl_q{};
  int draws = 0;
};

struct CalibrationSummary {
  std::vector<CalibrationRow> rows;
};

inline constexpr std::array<double, 5> kCalibrationProbs = {0.05, 0.25, 0.50,
                                                            0.75, 0.95};

namespace detail {

// linear interpolation between order statistics (the common "type 7" rule)
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw invalid_input("quantile of empty sample");
  const double h = p * (static_cast<double>(sorted.size()) - 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline std::array<double, 5> quantile_row(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  std::array<double, 5> out{};
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = quantile_sorted(values, kCalibrationProbs[i]);
  return out;
}

inline double weight_ratio_balance(const MatrixXd& w) {
  double bal = 1.0;
  for (int a1 = 0; a1 < w.rows(); ++a1)
    for (int a2 = a1 + 1; a2 < w.rows(); ++a2)
      for (int k = 0; k < w.cols(); ++k) {
        const double x = std::max(w(a1, k), kLogFloor);
        const double y = std::max(w(a2, k), kLogFloor);
        bal = std::min(bal, std::min(x / y, y / x));
      }
  return bal;
}

inline double weight_kl(const MatrixXd& w) {
  if (w.rows() < 2) return 0.0;
  double kl = 0.0;
  for (int k = 0; k < w.cols(); ++k) {
    const double p = w(0, k);
    if (p <= 0.0) continue;
    kl += p * (std::log(p) - floored_log(w(1, k)));
  }
  return std::max(kl, 0.0);
}

}  // namespace detail

inline CalibrationRow prior_balance_distribution(double g, double b, int K,
                                                 int r, int n_draws, Rng& rng) {
  if (!(g > 0.0) || !(b > 0.0)) throw invalid_input("g and b must be positive");
  if (K < 2) throw invalid_input("K must be at least 2");
  if (r < 2) throw invalid_input("need at least two attribute levels");
  if (n_draws < 100) throw invalid_input("need at least 100 draws");

  std::vector<double> balances, kls;
  balances.reserve(n_draws);
  kls.reserve(n_draws);
  const VectorXd beta_conc = VectorXd::Constant(K, g / K);
  for (int s = 0; s < n_draws; ++s) {
    const double alpha0 = gamma_draw(g, b, rng);
    const VectorXd beta = dirichlet_draw(beta_conc, rng);
    MatrixXd w(r, K);
    for (int a = 0; a < r; ++a)
      w.row(a) = dirichlet_draw(alpha0 * beta, rng).transpose();
    balances.push_back(detail::weight_ratio_balance(w));
    kls.push_back(detail::weight_kl(w));
  }

  CalibrationRow row;
  row.g = g;
  row.b = b;
  row.draws = n_draws;
  row.balance_q = detail::quantile_row(balances);
  row.kl_q = detail::quantile_row(kls);
  return row;
}

inline CalibrationSummary calibrate_grid(const std::vector<double>& gs,
                                         const std::vector<double>& bs, int K,
                                         int r, int n_draws, Rng& rng) {
  CalibrationSummary summary;
  for (double g : gs)
    for (double b : bs)
      summary.rows.push_back(prior_balance_distribution(g, b, K, r, n_draws, rng));
  return summary;
}

// pmf of the first occupancy coordinate when K = 2: the weight is Beta(g1, g2)
// and the count is the half-up rounding of N * weight, so cell j collects the
// Beta mass of the rounding interval [(j-0.5)/N, (j+0.5)/N) clipped to [0,1]
inline std::vector<double> lifted_beta_pmf(int n, double gamma1, double gamma2) {
  if (n < 1) throw invalid_input("n must be at least 1");
  if (!(gamma1 > 0.0) || !(gamma2 > 0.0))
    throw invalid_input("beta parameters must be positive");
  std::vector<double> pmf(static_cast<std::size_t>(n) + 1);
  // evaluate each rounding interval in whichever tail keeps the incomplete
  // beta small, avoiding cancellation between near-1 upper-tail values
  auto mass = [&](double lo, double hi) {
    lo = std::clamp(lo, 0.0, 1.0);
    hi = std::clamp(hi, 0.0, 1.0);
    if (hi <= 0.5)
      return boost::math::ibeta(gamma1, gamma2, hi) -
             boost::math::ibeta(gamma1, gamma2, lo);
    if (lo >= 0.5)
      return boost::math::ibetac(gamma1, gamma2, lo) -
             boost::math::ibetac(gamma1, gamma2, hi);
    return (boost::math::ibeta(gamma1, gamma2, 0.5) -
            boost::math::ibeta(gamma1, gamma2, lo)) +
           (boost::math::ibetac(gamma1, gamma2, 0.5) -
            boost::math::ibetac(gamma1, gamma2, hi));
  };
  for (int j = 0; j <= n; ++j)
    pmf[j] = std::max(mass((j - 0.5) / n, (j + 0.5) / n), 0.0);
  return pmf;
}

inline std::vector<double> beta_binomial_pmf(int n, double gamma1,
                                             double gamma2) {
  if (n < 1) throw invalid_input("n must be at least 1");
  if (!(gamma1 > 0.0) || !(gamma2 > 0.0))
    throw invalid_input("beta parameters must be positive");
  std::vector<double> pmf(static_cast<std::size_t>(n) + 1);
  const double log_norm = std::lgamma(gamma1 + gamma2) - std::lgamma(gamma1) -
                          std::lgamma(gamma2) + std::lgamma(n + 1.0) -
                          std::lgamma(n + gamma1 + gamma2);
  for (int j = 0; j <= n; ++j) {
    const double lp = log_norm + std::lgamma(j + gamma1) +
                      std::lgamma(n - j + gamma2) - std::lgamma(j + 1.0) -
                      std::lgamma(n - j + 1.0);
    pmf[j] = std::exp(lp);
  }
  return pmf;
}

inline double sym_kl(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw invalid_input("pmf size mismatch");
  bool floored = false;
  double total = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    double pj = p[j], qj = q[j];
    if (pj < kLogFloor || qj < kLogFloor) {
      floored = true;
      pj = std::max(pj, kLogFloor);
      qj = std::max(qj, kLogFloor);
    }
    total += (pj - qj) * (std::log(pj) - std::log(qj));
  }
  if (floored)
    std::cerr << "sym_kl: pmf cells floored at " << kLogFloor
              << " to keep logs finite\n";
  return std::max(total, 0.0);
}

inline double sym_kl_lifted_vs_bb(int n, double gamma1, double gamma2) {
  return sym_kl(lifted_beta_pmf(n, gamma1, gamma2),
                beta_binomial_pmf(n, gamma1, gamma2));
}

}  // namespace hfdp

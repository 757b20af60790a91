#pragma once

// Group-fairness diagnostics for a clustering: per-cluster balance, the
// reverse-KL independence pivot between attribute and cluster, the epsilon
// fairness gate, and the fair score that combines class-probability,
// density-fit and attribute-frequency terms.

#include "hfdp/core.hpp"

namespace hfdp {

struct ContingencyTable {
  MatrixXi counts;  // r x K
  VectorXi row_totals;
  VectorXi col_totals;
  long total = 0;

  static ContingencyTable from_counts(MatrixXi c) {
    if (c.rows() < 1 || c.cols() < 1)
      throw invalid_input("contingency table must be at least 1x1");
    if ((c.array() < 0).any()) throw invalid_input("contingency counts must be nonnegative");
    ContingencyTable t;
    t.row_totals = c.rowwise().sum();
    t.col_totals = c.colwise().sum().transpose();
    t.total = c.sum();
    t.counts = std::move(c);
    return t;
  }

  static ContingencyTable from_assignment(const std::vector<int>& attribute,
                                          const std::vector<int>& z, int r, int K) {
    if (attribute.size() != z.size())
      throw invalid_input("attribute and cluster vectors must have equal length");
    MatrixXi c = MatrixXi::Zero(r, K);
    for (std::size_t i = 0; i < z.size(); ++i) {
      if (attribute[i] < 0 || attribute[i] >= r)
        throw invalid_input("attribute label out of range at row " + std::to_string(i));
      if (z[i] < 0 || z[i] >= K)
        throw invalid_input("cluster label out of range at row " + std::to_string(i));
      ++c(attribute[i], z[i]);
    }
    return from_counts(std::move(c));
  }

  int r() const { return static_cast<int>(counts.rows()); }
  int K() const { return static_cast<int>(counts.cols()); }
};

struct BalanceResult {
  VectorXd per_cluster;       // empty clusters reported as 1 but see occupied
  std::vector<bool> occupied;
  double overall = 1.0;
};

// Definition: Balance(C_k) = min over label pairs of the two count ratios; a
// cluster missing some label scores 0.  Empty clusters do not enter the
// overall minimum; with a single attribute level there is no pair to violate.
inline BalanceResult balance(const ContingencyTable& t) {
  if (t.total == 0) throw invalid_input("balance: table has no observations");
  const int r = t.r(), K = t.K();
  BalanceResult res;
  res.per_cluster = VectorXd::Ones(K);
  res.occupied.assign(K, false);
  res.overall = 1.0;
  for (int k = 0; k < K; ++k) {
    if (t.col_totals[k] == 0) continue;
    res.occupied[k] = true;
    double bal = 1.0;
    for (int j1 = 0; j1 < r && bal > 0.0; ++j1) {
      for (int j2 = j1 + 1; j2 < r; ++j2) {
        double c1 = t.counts(j1, k), c2 = t.counts(j2, k);
        if (c1 == 0.0 || c2 == 0.0) {
          bal = 0.0;
          break;
        }
        bal = std::min(bal, std::min(c1 / c2, c2 / c1));
      }
    }
    res.per_cluster[k] = bal;
    res.overall = std::min(res.overall, bal);
  }
  return res;
}

// KL(P_A x P_Z || P_{A,Z}) on empirical proportions.  A zero joint cell with
// positive marginals makes the divergence infinite; zero-marginal terms
// vanish.
inline double mi_pivot(const ContingencyTable& t) {
  if (t.total < 1) throw invalid_input("mi_pivot: table has no observations");
  const double N = static_cast<double>(t.total);
  double kl = 0.0;
  for (int a = 0; a < t.r(); ++a) {
    const double pa = t.row_totals[a] / N;
    if (pa == 0.0) continue;
    for (int k = 0; k < t.K(); ++k) {
      const double pz = t.col_totals[k] / N;
      if (pz == 0.0) continue;
      const double joint = t.counts(a, k) / N;
      if (joint == 0.0) return kInf;
      kl += pa * pz * std::log(pa * pz / joint);
    }
  }
  return std::max(kl, 0.0);
}

inline bool epsilon_fair_set_check(const ContingencyTable& t, double epsilon) {
  return mi_pivot(t) <= epsilon;
}

inline bool epsilon_fair_set_check(const std::vector<int>& z, const LabeledDataset& ds,
                                   double epsilon, int K) {
  return epsilon_fair_set_check(ContingencyTable::from_assignment(ds.labels, z, ds.r, K), epsilon);
}

namespace detail {

// Per-(a,k) Gaussian plug-in fits: MLE mean and ridged MLE covariance, with
// small clusters borrowing the pooled covariance of their attribute group.
inline std::vector<std::vector<std::optional<MvnDensity>>> fit_plugin_densities(
    const std::vector<int>& z, const LabeledDataset& ds, int K) {
  const int d = ds.dim();
  auto ridge = [d](MatrixXd S) {
    S += 1e-6 * (S.trace() / d) * MatrixXd::Identity(d, d);
    return S;
  };
  std::vector<std::vector<std::optional<MvnDensity>>> fits(ds.r);
  for (int a = 0; a < ds.r; ++a) {
    MatrixXd xa = ds.points_of(a);
    std::vector<int> za(ds.count(a));
    for (int i = 0; i < ds.count(a); ++i) za[i] = z[ds.rows_of[a][i]];
    auto stats = compute_stats(xa, za, K);

    VectorXd pooled_mean = xa.colwise().mean();
    MatrixXd centered = xa.rowwise() - pooled_mean.transpose();
    MatrixXd pooled = ridge(centered.transpose() * centered / xa.rows());

    fits[a].resize(K);
    for (int k = 0; k < K; ++k) {
      const auto& s = stats[k];
      if (s.count == 0) continue;
      if (s.count >= d + 2) {
        fits[a][k].emplace(s.mean, ridge(s.scatter / s.count), a, k);
      } else {
        fits[a][k].emplace(s.mean, pooled, a, k);
      }
    }
  }
  return fits;
}

}  // namespace detail

// Fair score of a full assignment: -inf outside the epsilon-fair set, else
// class-probability + Gaussian-fit + attribute-frequency log terms.
inline double fair_score(const std::vector<int>& z, const LabeledDataset& ds, double epsilon,
                         int k_cap = 512) {
  if (z.size() != static_cast<std::size_t>(ds.n()))
    throw invalid_input("fair_score: assignment length must match the dataset");
  int K = 0;
  for (int zi : z) {
    if (zi < 0) throw invalid_input("fair_score: cluster labels must be nonnegative");
    K = std::max(K, zi + 1);
  }
  if (K > k_cap)
    throw invalid_input("fair_score: inferred cluster count " + std::to_string(K) +
                        " exceeds the cap " + std::to_string(k_cap));

  auto table = ContingencyTable::from_assignment(ds.labels, z, ds.r, K);
  if (mi_pivot(table) > epsilon) return -kInf;

  double score = 0.0;
  for (int a = 0; a < ds.r; ++a) {
    const double na = table.row_totals[a];
    for (int k = 0; k < K; ++k) {
      const double nak = table.counts(a, k);
      if (nak > 0.0) score += nak * std::log(nak / na);
    }
    score += na * std::log(na / ds.n());
  }

  auto fits = detail::fit_plugin_densities(z, ds, K);
  for (int i = 0; i < ds.n(); ++i) {
    const auto& fit = fits[ds.labels[i]][z[i]];
    score += fit->log_pdf(ds.points.row(i).transpose());
  }
  return score;
}

struct FairnessReport {
  BalanceResult balance;
  double mi = 0.0;
  bool epsilon_ok = false;
  double fair_score = -kInf;
};

inline FairnessReport build_fairness_report(const std::vector<int>& z, const LabeledDataset& ds,
                                            double epsilon, int k_cap = 512) {
  FairnessReport rep;
  int K = 1;
  for (int zi : z) K = std::max(K, zi + 1);
  auto table = ContingencyTable::from_assignment(ds.labels, z, ds.r, K);
  rep.balance = balance(table);
  rep.mi = mi_pivot(table);
  rep.epsilon_ok = rep.mi <= epsilon;
  rep.fair_score = fair_score(z, ds, epsilon, k_cap);
  return rep;
}

}  // namespace hfdp

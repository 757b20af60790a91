#pragma once

// The blocked MCMC sweep and its MC-EM variant.  The concentration state is
// carried as t = alpha0 * beta: the alpha0 move is a Metropolis step on the
// radial part, the beta update redraws t coordinate-wise through the
// auxiliary-gamma construction and then resyncs alpha0 = sum(t), and the
// weight update draws Dirichlet(t + m).  With the likelihood hooked out this
// sweep leaves the exact prior invariant, which is what the getting-it-right
// tests exercise.

#include "hfdp/binmat.hpp"
#include "hfdp/core.hpp"
#include "hfdp/logconcave.hpp"
#include "hfdp/transport.hpp"

namespace hfdp {

struct AttributeBeliefs {
  MatrixXd probs;  // N x r, rows on the simplex

  void validate(int n, int r) const {
    if (probs.rows() != n || probs.cols() != r)
      throw invalid_input("beliefs matrix must be N x r");
    for (int i = 0; i < n; ++i)
      if (!is_probability_vector(probs.row(i).transpose()))
        throw invalid_input("beliefs row " + std::to_string(i) + " is not on the simplex");
  }
};

inline std::vector<int> level_counts(const LabeledDataset& ds) {
  std::vector<int> c(ds.r);
  for (int a = 0; a < ds.r; ++a) c[a] = ds.count(a);
  return c;
}

// log of the alpha0 full conditional given beta and the group weights
inline double alpha0_log_target(double a0, const ChainState& st, const HfdpConfig& cfg) {
  const int r = static_cast<int>(st.w.rows());
  const int K = static_cast<int>(st.beta.size());
  double lp = (cfg.g - 1.0) * std::log(a0) - cfg.b * a0 + r * std::lgamma(a0);
  for (int k = 0; k < K; ++k) {
    const double ab = a0 * st.beta[k];
    lp -= r * std::lgamma(ab);
    double slw = 0.0;
    for (int a = 0; a < r; ++a) slw += floored_log(st.w(a, k));
    lp += ab * slw;
  }
  return lp;
}

// One log-normal random-walk Metropolis step on alpha0.
inline bool update_alpha0(ChainState& st, const HfdpConfig& cfg, double proposal_scale,
                          Rng& rng) {
  const double cur = st.alpha0;
  const double lp_cur = alpha0_log_target(cur, st, cfg);
  if (!std::isfinite(lp_cur))
    throw std::logic_error("alpha0 conditional is non-finite at the current state");
  const double prop = cur * std::exp(proposal_scale * std::normal_distribution<double>()(rng));
  const double lp_prop = alpha0_log_target(prop, st, cfg);
  const double log_ratio = lp_prop - lp_cur + std::log(prop) - std::log(cur);
  if (std::log(uniform01(rng)) < log_ratio) {
    st.alpha0 = prop;
    return true;
  }
  return false;
}

// Auxiliary-variable redraw of t = alpha0 * beta, coordinate-wise from the
// tilted density; beta and alpha0 are read back off the new t.
inline void update_beta(ChainState& st, const HfdpConfig& cfg, Rng& rng) {
  const int K = cfg.K;
  const int r = static_cast<int>(st.w.rows());
  double slog_u = 0.0;
  for (int i = 0; i < r; ++i) slog_u += floored_log(gamma_draw(st.alpha0, 1.0, rng));
  VectorXd t(K);
  for (int k = 0; k < K; ++k) {
    double slw = 0.0;
    for (int a = 0; a < r; ++a) slw += floored_log(st.w(a, k));
    const double c = cfg.b - slw - slog_u;
    double tk;
    if (r == 0) {
      tk = gamma_draw(cfg.g / K, c, rng);
    } else {
      tk = sample_tilted_gamma({r, cfg.g / K, c}, rng, -1, k);
    }
    t[k] = std::max(tk, 1e-290);
  }
  st.alpha0 = t.sum();
  st.beta = t / st.alpha0;
}

// Dirichlet redraw of each group weight row and the implied occupancy.  Until
// the z update runs, m and z may disagree; the sweep order guarantees the z
// update comes next.
inline void update_weights(ChainState& st, const std::vector<int>& counts,
                           const HfdpConfig& cfg, Rng& rng, bool prior_only = false) {
  const int r = static_cast<int>(counts.size());
  for (int a = 0; a < r; ++a) {
    VectorXd conc = st.alpha0 * st.beta;
    if (!prior_only) conc += st.m.row(a).cast<double>().transpose();
    VectorXd wa = dirichlet_draw(conc, rng);
    st.w.row(a) = wa.transpose();
    auto ma = rd(counts[a], wa);
    for (int k = 0; k < cfg.K; ++k) st.m(a, k) = ma[k];
  }
}

// Plug-in negative log-density cost matrix for one attribute group, built
// from the posterior predictive mean and scale of the current assignment.
inline MatrixXd plugin_cost_matrix(const MatrixXd& xa, const std::vector<int>& za, int K,
                                   const NiwParams& prior, int attribute) {
  const int d = static_cast<int>(xa.cols());
  auto stats = compute_stats(xa, za, K);
  MatrixXd L(xa.rows(), K);
  for (int k = 0; k < K; ++k) {
    NiwParams post = niw_posterior_params(prior, stats[k]);
    // inverse-Wishart mean needs nu - d - 1 > 0; clamp for barely-proper priors
    const double denom = std::max(post.nu0 - d - 1.0, 0.5);
    MvnDensity dens(post.mu0, post.Lambda0 / denom, attribute, k);
    for (int i = 0; i < xa.rows(); ++i) L(i, k) = -dens.log_pdf(xa.row(i).transpose());
  }
  return L;
}

// Transport proposal, rectangular-loop refinement, and the Barker choice
// between them, one attribute group at a time.
inline std::vector<char> update_z(ChainState& st, const LabeledDataset& ds,
                                  const HfdpConfig& cfg, Rng& rng) {
  std::vector<char> accepted(ds.r, 0);
  for (int a = 0; a < ds.r; ++a) {
    MatrixXd xa = ds.points_of(a);
    MatrixXd L = plugin_cost_matrix(xa, st.z[a], cfg.K, cfg.niw[a], a);

    TransportProblem tp;
    tp.cost = L;
    tp.col_sums = st.m.row(a).transpose();
    MarginBinaryMatrix b_prop = solve_binary_ot(tp);

    const long T = cfg.wrla_steps < 0 ? 50L * ds.count(a) : cfg.wrla_steps;
    auto weights = WeightMatrix::from_log(-L);
    MarginBinaryMatrix b_rec = wrla_run(b_prop, weights, T, rng);

    const MarginBinaryMatrix* chosen = &b_prop;
    if (b_rec.entries != b_prop.entries) {
      const double delta = log_relative_probability(b_rec, b_prop, weights);
      if (uniform01(rng) < logistic(delta)) {
        chosen = &b_rec;
        accepted[a] = 1;
      }
    }
    std::vector<int> z_cand = assignment_from_matrix(*chosen);

    if (cfg.strict_z) {
      // optional correction toward the collapsed conditional; on reject the
      // occupancy row is restored from the retained assignment
      const double lm_cur = log_marginal_z(xa, st.z[a], cfg.K, cfg.niw[a], a);
      const double lm_cand = log_marginal_z(xa, z_cand, cfg.K, cfg.niw[a], a);
      if (std::log(uniform01(rng)) < lm_cand - lm_cur) {
        st.z[a] = std::move(z_cand);
      } else {
        accepted[a] = 0;
        for (int k = 0; k < cfg.K; ++k) st.m(a, k) = 0;
        for (int zi : st.z[a]) ++st.m(a, zi);
      }
    } else {
      st.z[a] = std::move(z_cand);
    }
  }
  return accepted;
}

// Independent categorical redraw of every attribute label.  Retries the whole
// vector if some level empties, so the result is always a valid dataset.
inline LabeledDataset resample_attributes(const LabeledDataset& ds,
                                          const AttributeBeliefs& beliefs, Rng& rng) {
  beliefs.validate(ds.n(), ds.r);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<int> labels(ds.n());
    std::vector<int> seen(ds.r, 0);
    for (int i = 0; i < ds.n(); ++i) {
      double u = uniform01(rng);
      int a = ds.r - 1;
      double acc = 0.0;
      for (int j = 0; j < ds.r; ++j) {
        acc += beliefs.probs(i, j);
        if (u < acc) {
          a = j;
          break;
        }
      }
      labels[i] = a;
      ++seen[a];
    }
    if (std::all_of(seen.begin(), seen.end(), [](int c) { return c > 0; }))
      return LabeledDataset::create(ds.points, std::move(labels), ds.r);
  }
  throw numerical_degeneracy("attribute resampling cannot populate every level", -1, -1);
}

struct TraceSample {
  int iteration = 0;
  ChainState state;
  std::vector<int> z_flat;   // cluster per original row
  std::vector<int> labels;   // attribute per row at sampling time
  bool alpha0_accepted = false;
  std::vector<char> z_accepted;
  double log_marginal = 0.0;
};

struct ChainTrace {
  int n = 0;
  int K = 0;
  int r = 0;
  std::vector<TraceSample> samples;
};

struct GibbsOptions {
  bool prior_only = false;               // drop all data terms; targets the prior
  const AttributeBeliefs* beliefs = nullptr;
  bool check_invariants = true;
};

namespace detail {

inline std::vector<int> flatten_z(const LabeledDataset& ds, const ChainState& st) {
  std::vector<int> z(ds.n());
  for (int a = 0; a < ds.r; ++a)
    for (std::size_t i = 0; i < ds.rows_of[a].size(); ++i) z[ds.rows_of[a][i]] = st.z[a][i];
  return z;
}

inline void rebuild_from_flat(const std::vector<int>& z_flat, const LabeledDataset& ds,
                              ChainState& st, int K) {
  st.z.assign(ds.r, {});
  st.m.setZero(ds.r, K);
  for (int a = 0; a < ds.r; ++a) {
    st.z[a].resize(ds.rows_of[a].size());
    for (std::size_t i = 0; i < ds.rows_of[a].size(); ++i) {
      int zi = z_flat[ds.rows_of[a][i]];
      st.z[a][i] = zi;
      ++st.m(a, zi);
    }
  }
}

// k-means++-style seeding: spread K centers over the pooled points.
inline std::vector<VectorXd> seed_centers(const MatrixXd& points, int K, Rng& rng) {
  const int n = static_cast<int>(points.rows());
  std::vector<VectorXd> centers;
  centers.push_back(points.row(std::uniform_int_distribution<int>(0, n - 1)(rng)).transpose());
  VectorXd d2 = VectorXd::Constant(n, kInf);
  while (static_cast<int>(centers.size()) < K) {
    for (int i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], (points.row(i).transpose() - centers.back()).squaredNorm());
    double total = d2.sum();
    int pick = 0;
    if (total > 0.0) {
      double u = uniform01(rng) * total, acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += d2[i];
        if (u < acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = std::uniform_int_distribution<int>(0, n - 1)(rng);
    }
    centers.push_back(points.row(pick).transpose());
  }
  return centers;
}

inline ChainState initial_state(const LabeledDataset& ds, const HfdpConfig& cfg, Rng& rng,
                                bool prior_only) {
  const int K = cfg.K;
  ChainState st;
  st.alpha0 = cfg.g / cfg.b;
  st.beta = VectorXd::Constant(K, 1.0 / K);
  st.w = MatrixXd::Constant(ds.r, K, 1.0 / K);
  st.m.resize(ds.r, K);
  st.z.resize(ds.r);
  for (int a = 0; a < ds.r; ++a) {
    auto ma = rd(ds.count(a), st.w.row(a).transpose());
    for (int k = 0; k < K; ++k) st.m(a, k) = ma[k];
  }
  if (prior_only) {
    for (int a = 0; a < ds.r; ++a) {
      std::vector<int> occ(K);
      for (int k = 0; k < K; ++k) occ[k] = st.m(a, k);
      st.z[a] = shuffled_assignment(occ, rng);
    }
    return st;
  }
  auto centers = seed_centers(ds.points, K, rng);
  const int d = ds.dim();
  VectorXd mean = ds.points.colwise().mean();
  MatrixXd centered = ds.points.rowwise() - mean.transpose();
  MatrixXd cov = centered.transpose() * centered / ds.n();
  double tr = cov.trace();
  cov += 1e-6 * (tr > 0 ? tr / d : 1.0) * MatrixXd::Identity(d, d);
  std::vector<MvnDensity> dens;
  dens.reserve(K);
  for (int k = 0; k < K; ++k) dens.emplace_back(centers[k], cov);
  for (int a = 0; a < ds.r; ++a) {
    MatrixXd xa = ds.points_of(a);
    TransportProblem tp;
    tp.cost.resize(xa.rows(), K);
    for (int i = 0; i < xa.rows(); ++i)
      for (int k = 0; k < K; ++k) tp.cost(i, k) = -dens[k].log_pdf(xa.row(i).transpose());
    tp.col_sums = st.m.row(a).transpose();
    st.z[a] = assignment_from_matrix(solve_binary_ot(tp));
  }
  return st;
}

inline double total_log_marginal(const LabeledDataset& ds, const ChainState& st,
                                 const HfdpConfig& cfg) {
  double lm = 0.0;
  for (int a = 0; a < ds.r; ++a)
    lm += log_marginal_z(ds.points_of(a), st.z[a], cfg.K, cfg.niw[a], a);
  return lm;
}

}  // namespace detail

inline ChainTrace run_gibbs(const LabeledDataset& dataset, const HfdpConfig& cfg, Rng& rng,
                            const GibbsOptions& opts = {}) {
  cfg.validate(dataset.dim(), dataset.r);
  if (opts.beliefs) opts.beliefs->validate(dataset.n(), dataset.r);

  LabeledDataset cur = dataset;
  ChainState st = detail::initial_state(cur, cfg, rng, opts.prior_only);
  double scale = cfg.alpha0_step;

  ChainTrace trace;
  trace.n = cur.n();
  trace.K = cfg.K;
  trace.r = cur.r;

  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    const bool acc_a0 = update_alpha0(st, cfg, scale, rng);
    if (iter <= cfg.burnin) {
      // steer toward ~40% acceptance, then freeze so the kernel is fixed
      const double rate = 2.0 / std::sqrt(1.0 + iter);
      scale = std::clamp(scale * std::exp(rate * ((acc_a0 ? 1.0 : 0.0) - 0.4)), 1e-3, 20.0);
    }
    update_beta(st, cfg, rng);
    update_weights(st, level_counts(cur), cfg, rng, opts.prior_only);

    std::vector<char> acc_z(cur.r, 1);
    if (opts.prior_only) {
      for (int a = 0; a < cur.r; ++a) {
        std::vector<int> occ(cfg.K);
        for (int k = 0; k < cfg.K; ++k) occ[k] = st.m(a, k);
        st.z[a] = shuffled_assignment(occ, rng);
      }
    } else {
      acc_z = update_z(st, cur, cfg, rng);
    }

    if (opts.beliefs) {
      auto z_flat = detail::flatten_z(cur, st);
      cur = resample_attributes(cur, *opts.beliefs, rng);
      detail::rebuild_from_flat(z_flat, cur, st, cfg.K);
    }

    if (opts.check_invariants) st.check_invariants(level_counts(cur), cfg.K);

    if (iter > cfg.burnin && (iter - cfg.burnin) % cfg.thin == 0) {
      TraceSample s;
      s.iteration = iter;
      s.state = st;
      s.z_flat = detail::flatten_z(cur, st);
      s.labels = cur.labels;
      s.alpha0_accepted = acc_a0;
      s.z_accepted = acc_z;
      s.log_marginal = opts.prior_only ? 0.0 : detail::total_log_marginal(cur, st, cfg);
      trace.samples.push_back(std::move(s));
    }
  }
  return trace;
}

struct McemResult {
  ChainState state;
  std::vector<int> z_flat;
  std::vector<double> trajectory;  // total collapsed marginal per sweep
  bool converged = false;
  int sweeps = 0;
};

// Same sweep with the z step collapsed to the transport mode; stops when the
// assignment is stable for five consecutive sweeps.
inline McemResult run_mcem(const LabeledDataset& dataset, const HfdpConfig& cfg, Rng& rng) {
  cfg.validate(dataset.dim(), dataset.r);
  ChainState st = detail::initial_state(dataset, cfg, rng, false);
  double scale = cfg.alpha0_step;
  auto counts = level_counts(dataset);

  McemResult res;
  std::vector<int> prev = detail::flatten_z(dataset, st);
  int streak = 0;
  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    const bool acc = update_alpha0(st, cfg, scale, rng);
    if (iter <= cfg.burnin) {
      const double rate = 2.0 / std::sqrt(1.0 + iter);
      scale = std::clamp(scale * std::exp(rate * ((acc ? 1.0 : 0.0) - 0.4)), 1e-3, 20.0);
    }
    update_beta(st, cfg, rng);
    update_weights(st, counts, cfg, rng);
    for (int a = 0; a < dataset.r; ++a) {
      MatrixXd xa = dataset.points_of(a);
      TransportProblem tp;
      tp.cost = plugin_cost_matrix(xa, st.z[a], cfg.K, cfg.niw[a], a);
      tp.col_sums = st.m.row(a).transpose();
      st.z[a] = assignment_from_matrix(solve_binary_ot(tp));
    }
    st.check_invariants(counts, cfg.K);
    res.trajectory.push_back(detail::total_log_marginal(dataset, st, cfg));
    res.sweeps = iter;

    auto z = detail::flatten_z(dataset, st);
    streak = (z == prev) ? streak + 1 : 0;
    prev = std::move(z);
    if (streak >= 5) {
      res.converged = true;
      break;
    }
  }
  res.state = std::move(st);
  res.z_flat = std::move(prev);
  return res;
}

}  // namespace hfdp

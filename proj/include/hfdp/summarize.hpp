#pragma once

// Posterior summaries over a stored trace: mean co-clustering matrix, the
// least-squares representative configuration, the best stored configuration by
// fair score, and the posterior over the effective number of clusters.

#include <map>
#include <vector>

#include "hfdp/common.hpp"
#include "hfdp/metrics.hpp"
#include "hfdp/sampler.hpp"

namespace hfdp {

inline MatrixXd pairwise_probability(const ChainTrace& trace) {
  if (trace.samples.empty()) throw invalid_input("empty trace");
  const int n = trace.n;
  MatrixXd assoc = MatrixXd::Zero(n, n);
  const double inc = 1.0 / static_cast<double>(trace.samples.size());
  for (const auto& s : trace.samples) {
    // stream cluster groups instead of materializing per-sample matrices
    std::map<int, std::vector<int>> groups;
    for (int i = 0; i < n; ++i) groups[s.z_flat[i]].push_back(i);
    for (const auto& [k, rows] : groups)
      for (std::size_t p = 0; p < rows.size(); ++p)
        for (std::size_t q = p; q < rows.size(); ++q) {
          assoc(rows[p], rows[q]) += inc;
          if (q != p) assoc(rows[q], rows[p]) += inc;
        }
  }
  for (int i = 0; i < n; ++i) assoc(i, i) = 1.0;
  return assoc;
}

struct DahlResult {
  int index = 0;
  double distance = 0.0;  // squared distance to the mean association matrix
};

inline DahlResult dahl_least_squares(const ChainTrace& trace) {
  if (trace.samples.empty()) throw invalid_input("empty trace");
  const MatrixXd assoc = pairwise_probability(trace);
  const int n = trace.n;
  // dist(s) = sum_ij (I_s - assoc)^2 = sum_{same-cluster ij} (1 - 2 assoc) + const
  const double base = assoc.array().square().sum();
  DahlResult best;
  double best_dist = kInf;
  for (std::size_t s = 0; s < trace.samples.size(); ++s) {
    std::map<int, std::vector<int>> groups;
    for (int i = 0; i < n; ++i) groups[trace.samples[s].z_flat[i]].push_back(i);
    double dist = base;
    for (const auto& [k, rows] : groups)
      for (int i : rows)
        for (int j : rows) dist += 1.0 - 2.0 * assoc(i, j);
    if (dist < best_dist - 1e-12) {
      best_dist = dist;
      best.index = static_cast<int>(s);
    }
  }
  best.distance = best_dist;
  return best;
}

inline const TraceSample& dahl_sample(const ChainTrace& trace) {
  return trace.samples[dahl_least_squares(trace).index];
}

struct MapScoreResult {
  bool feasible = false;
  int index = -1;
  double score = -kInf;
};

inline MapScoreResult map_by_fair_score(const ChainTrace& trace,
                                        const LabeledDataset& dataset,
                                        double epsilon) {
  if (trace.samples.empty()) throw invalid_input("empty trace");
  MapScoreResult out;
  for (std::size_t s = 0; s < trace.samples.size(); ++s) {
    const auto& sample = trace.samples[s];
    // attribute labels may have been resampled along the chain; score each
    // configuration against the labels it was drawn with
    double score;
    if (sample.labels == dataset.labels) {
      score = fair_score(sample.z_flat, dataset, epsilon);
    } else {
      auto relabeled = LabeledDataset::create(dataset.points, sample.labels, dataset.r);
      score = fair_score(sample.z_flat, relabeled, epsilon);
    }
    if (score == -kInf) continue;
    if (!out.feasible || score > out.score) {
      out.feasible = true;
      out.index = static_cast<int>(s);
      out.score = score;
    }
  }
  return out;
}

inline int effective_cluster_count(const MatrixXi& m) {
  int count = 0;
  for (int k = 0; k < m.cols(); ++k)
    if ((m.col(k).array() > 0).any()) ++count;
  return count;
}

struct ClusterCountPosterior {
  std::map<int, long> counts;
  long total = 0;

  std::map<int, double> frequencies() const {
    std::map<int, double> out;
    for (const auto& [k, c] : counts)
      out[k] = static_cast<double>(c) / static_cast<double>(total);
    return out;
  }

  int modal_count() const {
    int best = 0;
    long best_count = -1;
    for (const auto& [k, c] : counts)
      if (c > best_count) {
        best = k;
        best_count = c;
      }
    return best;
  }
};

inline ClusterCountPosterior cluster_count_posterior(const ChainTrace& trace) {
  if (trace.samples.empty()) throw invalid_input("empty trace");
  ClusterCountPosterior post;
  for (const auto& s : trace.samples) {
    ++post.counts[effective_cluster_count(s.state.m)];
    ++post.total;
  }
  return post;
}

}  // namespace hfdp

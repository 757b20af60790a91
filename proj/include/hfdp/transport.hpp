#pragma once

// Exact constrained binary optimal transport: min <B, L> over 0/1 matrices
// with unit row sums and a prescribed column occupancy.  Solved as min-cost
// flow with successive shortest paths; a multiset-permutation brute force
// serves as the exact oracle on small instances.

#include <queue>

#include "hfdp/binmat.hpp"

namespace hfdp {

struct TransportProblem {
  MatrixXd cost;      // N x K
  VectorXi col_sums;  // occupancy m, summing to N

  void validate() const {
    if (cost.rows() < 1 || cost.cols() < 1) throw invalid_input("transport: empty cost matrix");
    if (!cost.allFinite()) throw invalid_input("transport: cost entries must be finite");
    if (col_sums.size() != cost.cols())
      throw invalid_input("transport: occupancy length must match the column count");
    if ((col_sums.array() < 0).any())
      throw invalid_input("transport: occupancy must be nonnegative");
    if (col_sums.sum() != cost.rows())
      throw invalid_input("transport: occupancy must sum to the row count");
  }

  int n() const { return static_cast<int>(cost.rows()); }
  int K() const { return static_cast<int>(cost.cols()); }
};

// Total cost of an assignment, summed in row order.  Both solvers report
// through this one reduction so their costs compare bit-for-bit.
inline double assignment_cost(const MatrixXd& cost, const std::vector<int>& z) {
  double c = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) c += cost(static_cast<int>(i), z[i]);
  return c;
}

inline std::vector<int> assignment_from_matrix(const MarginBinaryMatrix& b) {
  std::vector<int> z(b.u(), -1);
  for (int i = 0; i < b.u(); ++i) {
    for (int j = 0; j < b.v(); ++j) {
      if (b.entries(i, j) == 1) {
        if (z[i] != -1) throw invalid_input("assignment matrix has a row with two ones");
        z[i] = j;
      }
    }
    if (z[i] == -1) throw invalid_input("assignment matrix has an empty row");
  }
  return z;
}

inline MarginBinaryMatrix matrix_from_assignment(const std::vector<int>& z, int K) {
  MatrixXi e = MatrixXi::Zero(static_cast<int>(z.size()), K);
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z[i] < 0 || z[i] >= K) throw invalid_input("assignment label out of range");
    e(static_cast<int>(i), z[i]) = 1;
  }
  return MarginBinaryMatrix::create(std::move(e));
}

namespace detail {

// Dense-graph min-cost flow with potentials; Dijkstra ties resolve by node
// index, which pins the solver's tie-break deterministically.
class MinCostFlow {
 public:
  explicit MinCostFlow(int n) : head_(n, -1) {}

  void add_edge(int from, int to, int cap, double cost) {
    edges_.push_back({to, head_[from], cap, cost});
    head_[from] = static_cast<int>(edges_.size()) - 1;
    edges_.push_back({from, head_[to], 0, -cost});
    head_[to] = static_cast<int>(edges_.size()) - 1;
  }

  // returns total flow pushed from s to t
  int run(int s, int t) {
    const int n = static_cast<int>(head_.size());
    std::vector<double> pot(n, 0.0), dist(n);
    std::vector<int> prev_edge(n);
    int total = 0;
    while (true) {
      dist.assign(n, kInf);
      prev_edge.assign(n, -1);
      dist[s] = 0.0;
      using Item = std::pair<double, int>;
      std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
      pq.push({0.0, s});
      while (!pq.empty()) {
        auto [d, x] = pq.top();
        pq.pop();
        if (d > dist[x]) continue;
        for (int e = head_[x]; e != -1; e = edges_[e].next) {
          const auto& ed = edges_[e];
          if (ed.cap <= 0) continue;
          double nd = d + ed.cost + pot[x] - pot[ed.to];
          if (nd < dist[ed.to] - 1e-15) {
            dist[ed.to] = nd;
            prev_edge[ed.to] = e;
            pq.push({nd, ed.to});
          }
        }
      }
      if (prev_edge[t] == -1) break;
      for (int i = 0; i < n; ++i)
        if (std::isfinite(dist[i])) pot[i] += dist[i];
      int push = std::numeric_limits<int>::max();
      for (int x = t; x != s; x = edges_[prev_edge[x] ^ 1].to)
        push = std::min(push, edges_[prev_edge[x]].cap);
      for (int x = t; x != s; x = edges_[prev_edge[x] ^ 1].to) {
        edges_[prev_edge[x]].cap -= push;
        edges_[prev_edge[x] ^ 1].cap += push;
      }
      total += push;
    }
    return total;
  }

  int residual_cap(int edge_id) const { return edges_[edge_id].cap; }

 private:
  struct Edge {
    int to;
    int next;
    int cap;
    double cost;
  };
  std::vector<Edge> edges_;
  std::vector<int> head_;
};

}  // namespace detail

inline MarginBinaryMatrix solve_binary_ot(const TransportProblem& p) {
  p.validate();
  const int n = p.n(), K = p.K();
  // shift each row by its minimum so all arc costs are nonnegative
  MatrixXd shifted = p.cost;
  for (int i = 0; i < n; ++i) shifted.row(i).array() -= p.cost.row(i).minCoeff();

  const int source = 0, sink = 1 + K + n;
  detail::MinCostFlow flow(2 + K + n);
  for (int k = 0; k < K; ++k) flow.add_edge(source, 1 + k, p.col_sums[k], 0.0);
  std::vector<std::vector<int>> arc_id(n, std::vector<int>(K));
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < n; ++i) {
      arc_id[i][k] = 2 * (K + static_cast<int>(k) * n + i);
      flow.add_edge(1 + k, 1 + K + i, 1, shifted(i, k));
    }
  for (int i = 0; i < n; ++i) flow.add_edge(1 + K + i, sink, 1, 0.0);

  int pushed = flow.run(source, sink);
  if (pushed != n)
    throw invalid_input("transport: margins are infeasible");  // unreachable for valid input

  MatrixXi e = MatrixXi::Zero(n, K);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < K; ++k)
      if (flow.residual_cap(arc_id[i][k]) == 0) e(i, k) = 1;
  return MarginBinaryMatrix::create(std::move(e));
}

struct BruteForceResult {
  double cost = kInf;
  std::vector<int> assignment;
};

// Exhaustive minimum over all label vectors with the prescribed occupancy.
inline BruteForceResult brute_force_ot(const TransportProblem& p) {
  p.validate();
  if (p.n() > 8) throw capacity_error("brute force limited to 8 rows");
  if (p.K() > 3) throw capacity_error("brute force limited to 3 columns");
  std::vector<int> labels;
  for (int k = 0; k < p.K(); ++k) labels.insert(labels.end(), p.col_sums[k], k);
  BruteForceResult best;
  do {
    double c = assignment_cost(p.cost, labels);
    if (c < best.cost) {
      best.cost = c;
      best.assignment = labels;
    }
  } while (std::next_permutation(labels.begin(), labels.end()));
  return best;
}

}  // namespace hfdp

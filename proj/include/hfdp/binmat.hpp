#pragma once

// Fixed-margin 0/1 matrices and the weighted rectangular-loop sampler: pick a
// cell, extend it to a rectangle by entry-dependent rules, and Barker-swap
// checkerboards so the chain targets P(H) proportional to the product of cell
// weights raised to the entries.  Includes an exhaustive enumerator used as
// the exact oracle in tests.

#include "hfdp/common.hpp"

namespace hfdp {

struct MarginBinaryMatrix {
  MatrixXi entries;  // 0/1
  VectorXi row_sums;
  VectorXi col_sums;

  static MarginBinaryMatrix create(MatrixXi e) {
    MarginBinaryMatrix m;
    if (e.rows() < 1 || e.cols() < 1) throw invalid_input("binary matrix must be non-empty");
    if (((e.array() != 0) && (e.array() != 1)).any())
      throw invalid_input("binary matrix entries must be 0 or 1");
    m.row_sums = e.rowwise().sum();
    m.col_sums = e.colwise().sum().transpose();
    m.entries = std::move(e);
    return m;
  }

  int u() const { return static_cast<int>(entries.rows()); }
  int v() const { return static_cast<int>(entries.cols()); }

  void check_margins() const {
    if (entries.rowwise().sum() != row_sums || entries.colwise().sum().transpose() != col_sums)
      throw std::logic_error("binary matrix margins drifted from the declared sums");
  }
};

struct WeightMatrix {
  MatrixXd log_weights;

  static WeightMatrix from_log(MatrixXd lw) {
    if (!lw.allFinite()) throw invalid_input("weight matrix log entries must be finite");
    WeightMatrix w;
    w.log_weights = std::move(lw);
    return w;
  }

  static WeightMatrix uniform(int u, int v) { return {MatrixXd::Zero(u, v)}; }
};

inline bool is_checkerboard(int a11, int a12, int a21, int a22) {
  return (a11 == 1 && a22 == 1 && a12 == 0 && a21 == 0) ||
         (a11 == 0 && a22 == 0 && a12 == 1 && a21 == 1);
}

// log P(H1) - log P(H2) under the weight law, summed over the symmetric
// difference only so shared cells cancel exactly.
inline double log_relative_probability(const MarginBinaryMatrix& h1, const MarginBinaryMatrix& h2,
                                       const WeightMatrix& w) {
  if (h1.u() != h2.u() || h1.v() != h2.v() || h1.row_sums != h2.row_sums ||
      h1.col_sums != h2.col_sums)
    throw invalid_input("relative probability needs matrices with identical margins");
  if (w.log_weights.rows() != h1.u() || w.log_weights.cols() != h1.v())
    throw invalid_input("weight matrix shape must match the binary matrices");
  double delta = 0.0;
  for (int i = 0; i < h1.u(); ++i) {
    for (int j = 0; j < h1.v(); ++j) {
      int d = h1.entries(i, j) - h2.entries(i, j);
      if (d != 0) delta += d * w.log_weights(i, j);
    }
  }
  return delta;
}

// Rectangular-loop chain with incremental column index structures; one step is
// O(1) expected when rows are sparse.
class WrlaChain {
 public:
  WrlaChain(const MarginBinaryMatrix& a, const WeightMatrix& w)
      : u_(a.u()), v_(a.v()), entries_(a.entries), log_w_(w.log_weights) {
    if (log_w_.rows() != u_ || log_w_.cols() != v_)
      throw invalid_input("weight matrix shape must match the binary matrix");
    a.check_margins();
    col_ones_.assign(v_, {});
    pos_.assign(static_cast<std::size_t>(u_) * v_, -1);
    row_sums_ = a.row_sums;
    for (int i = 0; i < u_; ++i)
      for (int j = 0; j < v_; ++j)
        if (entries_(i, j) == 1) {
          pos_[idx(i, j)] = static_cast<int>(col_ones_[j].size());
          col_ones_[j].push_back(i);
        }
  }

  void step(Rng& rng) {
    int r1 = std::uniform_int_distribution<int>(0, u_ - 1)(rng);
    int c1 = std::uniform_int_distribution<int>(0, v_ - 1)(rng);
    int r2, c2;
    if (entries_(r1, c1) == 1) {
      if (!pick_zero_in_row(r1, c2, rng)) return;
      if (!pick_one_in_col(c2, r2, rng)) return;
      // rectangle [[1,0],[A(r2,c1),1]] is a checkerboard iff A(r2,c1)=0
      if (entries_(r2, c1) != 0) return;
    } else {
      if (!pick_one_in_col(c1, r2, rng)) return;
      if (!pick_zero_in_row(r2, c2, rng)) return;
      // rectangle [[0,A(r1,c2)],[1,0]] is a checkerboard iff A(r1,c2)=1
      if (entries_(r1, c2) != 1) return;
    }
    // Swap flips all four corners; the proposal is symmetric, so the Barker
    // rule P(B)/(P(A)+P(B)) keeps the weight law stationary.
    double delta = 0.0;
    for (auto [i, j] : {std::pair{r1, c1}, {r1, c2}, {r2, c1}, {r2, c2}}) {
      delta += entries_(i, j) == 1 ? -log_w_(i, j) : log_w_(i, j);
    }
    if (uniform01(rng) < logistic(delta)) {
      flip(r1, c1);
      flip(r1, c2);
      flip(r2, c1);
      flip(r2, c2);
    }
  }

  MarginBinaryMatrix matrix() const { return MarginBinaryMatrix::create(entries_); }
  const MatrixXi& entries() const { return entries_; }

 private:
  std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i) * v_ + j; }

  bool pick_zero_in_row(int r, int& c_out, Rng& rng) {
    if (row_sums_[r] == v_) return false;
    std::uniform_int_distribution<int> pick(0, v_ - 1);
    do {
      c_out = pick(rng);
    } while (entries_(r, c_out) != 0);
    return true;
  }

  bool pick_one_in_col(int c, int& r_out, Rng& rng) {
    if (col_ones_[c].empty()) return false;
    int k = std::uniform_int_distribution<int>(0, static_cast<int>(col_ones_[c].size()) - 1)(rng);
    r_out = col_ones_[c][k];
    return true;
  }

  void flip(int i, int j) {
    if (entries_(i, j) == 1) {
      entries_(i, j) = 0;
      --row_sums_[i];
      auto& ones = col_ones_[j];
      int p = pos_[idx(i, j)];
      int last = ones.back();
      ones[p] = last;
      pos_[idx(last, j)] = p;
      ones.pop_back();
      pos_[idx(i, j)] = -1;
    } else {
      entries_(i, j) = 1;
      ++row_sums_[i];
      pos_[idx(i, j)] = static_cast<int>(col_ones_[j].size());
      col_ones_[j].push_back(i);
    }
  }

  int u_, v_;
  MatrixXi entries_;
  MatrixXd log_w_;
  VectorXi row_sums_;
  std::vector<std::vector<int>> col_ones_;
  std::vector<int> pos_;
};

inline MarginBinaryMatrix wrla_step(const MarginBinaryMatrix& a, const WeightMatrix& w, Rng& rng) {
  WrlaChain chain(a, w);
  chain.step(rng);
  return chain.matrix();
}

inline MarginBinaryMatrix wrla_run(const MarginBinaryMatrix& a0, const WeightMatrix& w, long t,
                                   Rng& rng) {
  if (t < 0) throw invalid_input("wrla_run: iteration count must be >= 0");
  WrlaChain chain(a0, w);
  for (long i = 0; i < t; ++i) chain.step(rng);
  return chain.matrix();
}

// Every 0/1 matrix with the given margins, by row-wise backtracking with
// column-capacity pruning.  Guarded: meant for test-sized problems only.
inline std::vector<MarginBinaryMatrix> enumerate_fixed_margin(const VectorXi& row_sums,
                                                              const VectorXi& col_sums) {
  const int u = static_cast<int>(row_sums.size());
  const int v = static_cast<int>(col_sums.size());
  if (u < 1 || v < 1) throw invalid_input("margins must be non-empty");
  if (static_cast<long>(u) * v > 30)
    throw capacity_error("enumeration limited to 30 cells");
  if (row_sums.sum() != col_sums.sum())
    throw invalid_input("row and column margins must have equal totals");
  for (int i = 0; i < u; ++i)
    if (row_sums[i] < 0 || row_sums[i] > v) throw invalid_input("row margin out of range");
  for (int j = 0; j < v; ++j)
    if (col_sums[j] < 0 || col_sums[j] > u) throw invalid_input("column margin out of range");

  std::vector<MarginBinaryMatrix> out;
  MatrixXi m = MatrixXi::Zero(u, v);
  VectorXi cap = col_sums;
  std::vector<int> chosen;

  // enumerate column subsets of size row_sums[row] for one row, then recurse
  auto rec = [&](auto&& self, int row, int col, int need) -> void {
    if (need == 0) {
      if (row + 1 == u) {
        if ((cap.array() == 0).all()) out.push_back(MarginBinaryMatrix::create(m));
        return;
      }
      // remaining capacity must match remaining demand
      long remaining = 0;
      for (int i = row + 1; i < u; ++i) remaining += row_sums[i];
      if (cap.sum() != remaining) return;
      for (int j = 0; j < v; ++j)
        if (cap[j] > u - row - 1) return;
      self(self, row + 1, 0, row_sums[row + 1]);
      return;
    }
    if (v - col < need) return;
    for (int j = col; j <= v - need; ++j) {
      if (cap[j] == 0) continue;
      m(row, j) = 1;
      --cap[j];
      self(self, row, j + 1, need - 1);
      ++cap[j];
      m(row, j) = 0;
    }
  };
  rec(rec, 0, 0, row_sums[0]);
  return out;
}

}  // namespace hfdp

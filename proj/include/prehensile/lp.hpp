#pragma once

// Dense two-phase simplex (Bland's rule) for the small linear programs used
// to bound contact-force distributions:
//
//   minimize c'x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  x >= 0.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

namespace prehensile::lp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Status { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::kOptimal: return "optimal";
    case Status::kInfeasible: return "infeasible";
    case Status::kUnbounded: return "unbounded";
    case Status::kIterationLimit: return "iteration_limit";
  }
  return "?";
}

struct Result {
  Status status = Status::kInfeasible;
  VectorXd x;
  double objective = 0.0;
};

struct Program {
  VectorXd c;
  MatrixXd A_eq;
  VectorXd b_eq;
  MatrixXd A_ub;
  VectorXd b_ub;
};

namespace detail {

// Simplex tableau B^-1 [A | b] over a fixed original system. The tableau is
// rebuilt from the original columns every `kRefactor` pivots so rounding
// does not accumulate into the zero tests.
class Tableau {
 public:
  static constexpr int kRefactor = 64;

  Tableau(MatrixXd a, VectorXd b, std::vector<int> basis)
      : a0_(a), b0_(b), a_(std::move(a)), b_(std::move(b)), basis_(std::move(basis)) {}

  // Minimizes cost'x over the current feasible basis (Bland's rule).
  Status optimize(const VectorXd& cost, const std::vector<bool>& allowed, double tol,
                  int max_iters) {
    for (int it = 0; it < max_iters; ++it) {
      const VectorXd reduced = reduced_costs(cost);
      int enter = -1;
      for (int j = 0; j < a_.cols(); ++j) {
        if (allowed[j] && reduced[j] < -tol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return Status::kOptimal;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < a_.rows(); ++i) {
        if (a_(i, enter) > tol) best = std::min(best, std::max(b_[i], 0.0) / a_(i, enter));
      }
      if (!std::isfinite(best)) return Status::kUnbounded;
      int leave = -1;
      for (int i = 0; i < a_.rows(); ++i) {
        if (a_(i, enter) > tol && std::max(b_[i], 0.0) / a_(i, enter) <= best + tol &&
            (leave < 0 || basis_[i] < basis_[leave])) {
          leave = i;
        }
      }
      pivot(leave, enter);
      if (++pivots_ % kRefactor == 0) refactor();
    }
    return Status::kIterationLimit;
  }

  void pivot(int r, int c) {
    const double p = a_(r, c);
    a_.row(r) /= p;
    b_[r] /= p;
    for (int i = 0; i < a_.rows(); ++i) {
      if (i == r) continue;
      const double f = a_(i, c);
      if (f != 0.0) {
        a_.row(i) -= f * a_.row(r);
        b_[i] -= f * b_[r];
      }
    }
    basis_[r] = c;
  }

  void refactor() {
    const int m = static_cast<int>(a0_.rows());
    MatrixXd B(m, m);
    for (int i = 0; i < m; ++i) B.col(i) = a0_.col(basis_[i]);
    const Eigen::PartialPivLU<MatrixXd> lu(B);
    a_ = lu.solve(a0_);
    b_ = lu.solve(b0_);
  }

  VectorXd reduced_costs(const VectorXd& cost) const {
    VectorXd cb(a_.rows());
    for (int i = 0; i < a_.rows(); ++i) cb[i] = cost[basis_[i]];
    return cost.transpose() - cb.transpose() * a_;
  }

  VectorXd solution() const {
    VectorXd x = VectorXd::Zero(a_.cols());
    for (int i = 0; i < a_.rows(); ++i) x[basis_[i]] = std::max(b_[i], 0.0);
    return x;
  }

  const MatrixXd& a() const { return a_; }
  const std::vector<int>& basis() const { return basis_; }

 private:
  MatrixXd a0_;
  VectorXd b0_;
  MatrixXd a_;
  VectorXd b_;
  std::vector<int> basis_;
  long pivots_ = 0;
};

inline Result solve_core(const Program& prog, double tol = 1e-8, int max_iters = 20000) {
  const int n = static_cast<int>(prog.c.size());
  const int me = static_cast<int>(prog.b_eq.size());
  const int mu = static_cast<int>(prog.b_ub.size());
  const int m = me + mu;
  // Columns: x (n), slacks (mu), artificials (m).
  const int cols = n + mu + m;
  MatrixXd a = MatrixXd::Zero(m, cols);
  VectorXd b(m);
  if (me > 0) {
    a.block(0, 0, me, n) = prog.A_eq;
    b.head(me) = prog.b_eq;
  }
  if (mu > 0) {
    a.block(me, 0, mu, n) = prog.A_ub;
    a.block(me, n, mu, mu).setIdentity();
    b.tail(mu) = prog.b_ub;
  }
  for (int i = 0; i < m; ++i) {
    if (b[i] < 0) {
      a.row(i) *= -1.0;
      b[i] *= -1.0;
    }
    a(i, n + mu + i) = 1.0;
  }
  std::vector<int> basis(m);
  for (int i = 0; i < m; ++i) basis[i] = n + mu + i;
  detail::Tableau t(std::move(a), std::move(b), std::move(basis));

  Result res;
  VectorXd phase1 = VectorXd::Zero(cols);
  phase1.tail(m).setOnes();
  std::vector<bool> allowed(cols, true);
  const Status s1 = t.optimize(phase1, allowed, tol, max_iters);
  if (s1 == Status::kIterationLimit) {
    res.status = s1;
    return res;
  }
  t.refactor();
  const VectorXd x1 = t.solution();
  const double scale = 1.0 + prog.b_eq.cwiseAbs().sum() + prog.b_ub.cwiseAbs().sum();
  if (x1.tail(m).sum() > 1e-8 * scale) {
    res.status = Status::kInfeasible;
    return res;
  }
  // Drive zero-valued artificials out of the basis. Rows where no original
  // column can replace them are redundant; their artificial stays basic at
  // zero and never moves.
  for (int i = 0; i < m; ++i) {
    if (t.basis()[i] < n + mu) continue;
    int col = -1;
    double size = 1e-9;
    for (int j = 0; j < n + mu; ++j) {
      if (std::abs(t.a()(i, j)) > size) {
        size = std::abs(t.a()(i, j));
        col = j;
      }
    }
    if (col >= 0) t.pivot(i, col);
  }
  for (int j = n + mu; j < cols; ++j) allowed[j] = false;
  VectorXd cost = VectorXd::Zero(cols);
  cost.head(n) = prog.c;
  const Status s2 = t.optimize(cost, allowed, tol, max_iters);
  t.refactor();
  res.status = s2;
  res.x = t.solution().head(n);
  res.objective = prog.c.dot(res.x);
  return res;
}

}  // namespace detail

// Equality rows with one nonzero fix their variable; fixed variables are
// substituted out before the simplex runs.
inline Result solve(const Program& prog, double tol = 1e-8, int max_iters = 20000) {
  const int n = static_cast<int>(prog.c.size());
  const int me = static_cast<int>(prog.b_eq.size());
  std::vector<bool> fixed(n, false);
  std::vector<bool> row_done(me, false);
  VectorXd value = VectorXd::Zero(n);
  VectorXd beq = prog.b_eq;
  VectorXd bub = prog.b_ub;
  for (bool changed = true; changed;) {
    changed = false;
    for (int i = 0; i < me; ++i) {
      if (row_done[i]) continue;
      int nz = 0, col = -1;
      for (int j = 0; j < n; ++j) {
        if (!fixed[j] && prog.A_eq(i, j) != 0.0) {
          ++nz;
          col = j;
        }
      }
      if (nz > 1) continue;
      row_done[i] = true;
      changed = true;
      if (nz == 0) {
        if (std::abs(beq[i]) > 1e-8 * (1.0 + beq.cwiseAbs().maxCoeff())) return Result{};
        continue;
      }
      const double v = beq[i] / prog.A_eq(i, col);
      if (v < -tol) return Result{};
      fixed[col] = true;
      value[col] = std::max(v, 0.0);
      beq -= prog.A_eq.col(col) * value[col];
      if (bub.size() > 0) bub -= prog.A_ub.col(col) * value[col];
    }
  }
  std::vector<int> cols, rows;
  for (int j = 0; j < n; ++j) {
    if (!fixed[j]) cols.push_back(j);
  }
  for (int i = 0; i < me; ++i) {
    if (!row_done[i]) rows.push_back(i);
  }
  Program sub;
  sub.c.resize(cols.size());
  sub.A_eq.resize(rows.size(), cols.size());
  sub.b_eq.resize(rows.size());
  sub.A_ub.resize(prog.A_ub.rows(), cols.size());
  sub.b_ub = bub;
  for (size_t k = 0; k < cols.size(); ++k) {
    sub.c[k] = prog.c[cols[k]];
    for (size_t r = 0; r < rows.size(); ++r) sub.A_eq(r, k) = prog.A_eq(rows[r], cols[k]);
    sub.A_ub.col(k) = prog.A_ub.col(cols[k]);
  }
  for (size_t r = 0; r < rows.size(); ++r) sub.b_eq[r] = beq[rows[r]];
  Result res;
  if (cols.empty()) {
    if (bub.size() > 0 && bub.minCoeff() < -tol) return res;
    res.status = Status::kOptimal;
  } else {
    res = detail::solve_core(sub, tol, max_iters);
    if (res.status != Status::kOptimal) return res;
  }
  VectorXd x = value;
  for (size_t k = 0; k < cols.size(); ++k) x[cols[k]] = res.x[k];
  res.x = x;
  res.objective = prog.c.dot(x);
  return res;
}

}  // namespace prehensile::lp

#pragma once

// Mixed linear complementarity problems:
//
//   0 = M_aa x + M_ab z + q_a                      (x free, first m rows)
//   w = M_ba x + M_bb z + q_b >= 0,  z >= 0,  z'w = 0
//
// The free block is eliminated by a Schur complement and the remaining LCP is
// solved by Lemke's method (lexicographic), projected Gauss-Seidel, or, for
// small problems, exhaustive enumeration of complementary bases.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace prehensile::lcp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Problem {
  MatrixXd M;
  VectorXd q;
  int equality_count = 0;  // leading unconstrained variables

  int size() const { return static_cast<int>(q.size()); }
  int complementary_size() const { return size() - equality_count; }

  void validate() const {
    const int n = size();
    if (n < 1) throw DimensionError("lcp: empty problem");
    if (M.rows() != n || M.cols() != n) {
      throw DimensionError("lcp: M is " + std::to_string(M.rows()) + "x" +
                           std::to_string(M.cols()) + ", q has " + std::to_string(n));
    }
    if (equality_count < 0 || equality_count > n) {
      throw DimensionError("lcp: equality block size out of range");
    }
    if (!M.allFinite() || !q.allFinite()) {
      throw std::invalid_argument("lcp: non-finite entries");
    }
  }
};

enum class Status { kSolved, kRayTermination, kIterationLimit };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::kSolved: return "solved";
    case Status::kRayTermination: return "ray_termination";
    case Status::kIterationLimit: return "iteration_limit";
  }
  return "?";
}

struct Solution {
  VectorXd z;  // full variable vector, free block first
  VectorXd w;  // M z + q; zero on the free block when solved
  Status status = Status::kIterationLimit;
  double residual = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool regularized = false;
  // Complementary indices (relative to the constrained block) whose z is basic.
  std::vector<int> basis;
};

// Violation of the mixed-LCP conditions by z. Equation rows, negative w and
// complementarity products are measured relative to 1 + max abs(q).
inline double residual(const Problem& p, const VectorXd& z, VectorXd* w_out = nullptr) {
  const VectorXd w = p.M * z + p.q;
  const double scale = 1.0 + p.q.cwiseAbs().maxCoeff();
  double r = 0.0;
  for (int i = 0; i < p.size(); ++i) {
    if (i < p.equality_count) {
      r = std::max(r, std::abs(w[i]) / scale);
    } else {
      r = std::max({r, -z[i], -w[i] / scale, std::abs(z[i] * w[i]) / scale});
    }
  }
  if (w_out != nullptr) *w_out = w;
  return r;
}

// Pure LCP obtained by eliminating the free block.
class Reduced {
 public:
  explicit Reduced(const Problem& p) : m_(p.equality_count), n_(p.size()) {
    p.validate();
    const int c = n_ - m_;
    if (m_ == 0) {
      M = p.M;
      q = p.q;
      return;
    }
    const MatrixXd Maa = p.M.topLeftCorner(m_, m_);
    lu_ = Eigen::FullPivLU<MatrixXd>(Maa);
    if (!lu_.isInvertible()) {
      throw std::invalid_argument("lcp: equality block is singular");
    }
    Mab_ = p.M.topRightCorner(m_, c);
    qa_ = p.q.head(m_);
    const MatrixXd Mba = p.M.bottomLeftCorner(c, m_);
    const MatrixXd solve_ab = lu_.solve(Mab_);
    const VectorXd solve_qa = lu_.solve(qa_);
    M = p.M.bottomRightCorner(c, c) - Mba * solve_ab;
    q = p.q.tail(c) - Mba * solve_qa;
  }

  // Full variable vector from the complementary part.
  VectorXd expand(const VectorXd& zc) const {
    VectorXd z(n_);
    if (m_ > 0) z.head(m_) = -lu_.solve(Mab_ * zc + qa_);
    z.tail(n_ - m_) = zc;
    return z;
  }

  MatrixXd M;
  VectorXd q;

 private:
  int m_;
  int n_;
  Eigen::FullPivLU<MatrixXd> lu_;
  MatrixXd Mab_;
  VectorXd qa_;
};

struct LemkeOptions {
  double tol = 1e-9;
  int max_pivots = 0;  // 0: 50 * n
  bool regularize_on_failure = true;
};

namespace detail {

struct LemkeRun {
  VectorXd zc;
  Status status = Status::kIterationLimit;
  int pivots = 0;
  std::vector<int> basis;
};

inline LemkeRun lemke_pure(const MatrixXd& M, const VectorXd& q, int max_pivots,
                           double relative_pivot_tol = 1e-7) {
  const int n = static_cast<int>(q.size());
  LemkeRun run;
  run.zc = VectorXd::Zero(n);
  if (n == 0 || q.minCoeff() >= 0.0) {
    run.status = Status::kSolved;
    return run;
  }
  // Columns: w (0..n-1), z (n..2n-1), z0 (2n). Tableau holds B^-1 [I -M -e].
  const int z0 = 2 * n;
  MatrixXd T(n, 2 * n + 1);
  T.leftCols(n).setIdentity();
  T.middleCols(n, n) = -M;
  T.col(z0).setConstant(-1.0);
  VectorXd rhs = q;
  std::vector<int> basic(n);
  for (int i = 0; i < n; ++i) basic[i] = i;

  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  const double piv_tol = relative_pivot_tol * scale;

  auto pivot = [&](int r, int c) {
    const double p = T(r, c);
    T.row(r) /= p;
    rhs[r] /= p;
    VectorXd d = T.col(c);
    d[r] = 0.0;
    T.noalias() -= d * T.row(r);
    rhs.noalias() -= d * rhs[r];
    T.col(c).setZero();
    T(r, c) = 1.0;
    basic[r] = c;
    ++run.pivots;
  };

  // Initial pivot: z0 enters at the most negative right-hand side (ties ->
  // largest index, which keeps the tableau lexicographically positive).
  int r = 0;
  for (int i = 1; i < n; ++i) {
    if (rhs[i] <= rhs[r]) r = i;
  }
  const int first_out = basic[r];
  pivot(r, z0);
  int entering = first_out < n ? first_out + n : first_out - n;

  const int limit = max_pivots > 0 ? max_pivots : 50 * n;
  while (run.pivots < limit) {
    const auto col = T.col(entering);
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> ties;
    for (int i = 0; i < n; ++i) {
      if (col[i] > piv_tol) {
        const double ratio = std::max(rhs[i], 0.0) / col[i];
        if (ties.empty() || ratio < best - 1e-12 * (1.0 + std::abs(best))) {
          best = ratio;
          ties.assign(1, i);
        } else if (ratio <= best + 1e-12 * (1.0 + std::abs(best))) {
          ties.push_back(i);
        }
      }
    }
    if (ties.empty()) {
      run.status = Status::kRayTermination;
      return run;
    }
    int leave = ties.front();
    const auto z0_row = std::find_if(ties.begin(), ties.end(),
                                     [&](int i) { return basic[i] == z0; });
    if (z0_row != ties.end()) {
      leave = *z0_row;
    } else if (ties.size() > 1) {
      // Lexicographic minimum of rows of B^-1 scaled by the pivot column.
      for (int j = 0; j < n && ties.size() > 1; ++j) {
        double lo = std::numeric_limits<double>::infinity();
        for (int i : ties) lo = std::min(lo, T(i, j) / col[i]);
        std::vector<int> keep;
        for (int i : ties) {
          if (T(i, j) / col[i] <= lo + 1e-13) keep.push_back(i);
        }
        ties.swap(keep);
      }
      leave = ties.front();
    }
    const int leaving = basic[leave];
    pivot(leave, entering);
    if (leaving == z0) {
      for (int i = 0; i < n; ++i) {
        if (basic[i] >= n && basic[i] < 2 * n) {
          run.zc[basic[i] - n] = std::max(rhs[i], 0.0);
          run.basis.push_back(basic[i] - n);
        }
      }
      std::sort(run.basis.begin(), run.basis.end());
      run.status = Status::kSolved;
      return run;
    }
    entering = leaving < n ? leaving + n : leaving - n;
  }
  run.status = Status::kIterationLimit;
  return run;
}

// Positive diagonal scalings R, C with R M C near unit row and column
// maxima. Complementarity is preserved: w' = R w and z = C z'.
struct Scaling {
  VectorXd row;
  VectorXd col;
};

inline Scaling equilibrate(const MatrixXd& M, int sweeps = 8) {
  const int n = static_cast<int>(M.rows());
  Scaling s{VectorXd::Ones(n), VectorXd::Ones(n)};
  MatrixXd A = M.cwiseAbs();
  for (int it = 0; it < sweeps; ++it) {
    for (int i = 0; i < n; ++i) {
      const double r = A.row(i).maxCoeff();
      if (r > 0.0) {
        const double f = 1.0 / std::sqrt(r);
        s.row[i] *= f;
        A.row(i) *= f;
      }
    }
    for (int j = 0; j < n; ++j) {
      const double c = A.col(j).maxCoeff();
      if (c > 0.0) {
        const double f = 1.0 / std::sqrt(c);
        s.col[j] *= f;
        A.col(j) *= f;
      }
    }
  }
  return s;
}

}  // namespace detail

inline std::optional<VectorXd> basis_solution(const Problem& p, const std::vector<int>& basis,
                                              bool clamp = true);

// Expands a pivoting result and, when a basis is known, re-solves it on the
// unreduced system if that certifies better.
inline Solution finalize(const Problem& p, const Reduced& red, const VectorXd& zc,
                         Status status, double tol, const std::vector<int>* basis = nullptr) {
  Solution s;
  s.z = red.expand(zc);
  s.residual = residual(p, s.z, &s.w);
  if (status == Status::kSolved && basis != nullptr && p.equality_count > 0) {
    if (const auto z = basis_solution(p, *basis)) {
      VectorXd w;
      const double r = residual(p, *z, &w);
      if (r < s.residual) {
        s.z = *z;
        s.w = w;
        s.residual = r;
      }
    }
  }
  s.status = status;
  if (status == Status::kSolved && !(s.residual <= tol)) s.status = Status::kIterationLimit;
  return s;
}

// Full z with the given complementary indices basic and every other
// complementary variable zero, from the unreduced system
//
//   [ M_aa  M_aB ] [x  ]   [-q_a]
//   [ M_Ba  M_BB ] [z_B] = [-q_B]
//
// Solving it directly keeps the free variables accurate when the Schur
// complement is badly conditioned.
inline std::optional<VectorXd> basis_solution(const Problem& p, const std::vector<int>& basis,
                                              bool clamp) {
  const int m = p.equality_count;
  const int c = p.complementary_size();
  const int k = static_cast<int>(basis.size());
  std::vector<int> idx(m + k);
  for (int i = 0; i < m; ++i) idx[i] = i;
  for (int i = 0; i < k; ++i) {
    if (basis[i] < 0 || basis[i] >= c) return std::nullopt;
    idx[m + i] = m + basis[i];
  }
  VectorXd z = VectorXd::Zero(p.size());
  if (m + k == 0) return z;
  MatrixXd K(m + k, m + k);
  VectorXd r(m + k);
  for (int i = 0; i < m + k; ++i) {
    r[i] = -p.q[idx[i]];
    for (int j = 0; j < m + k; ++j) K(i, j) = p.M(idx[i], idx[j]);
  }
  const Eigen::FullPivLU<MatrixXd> lu(K);
  if (!lu.isInvertible()) return std::nullopt;
  const VectorXd y = lu.solve(r);
  if (!y.allFinite()) return std::nullopt;
  for (int i = 0; i < m + k; ++i) z[idx[i]] = y[i];
  if (clamp) {
    for (int i = m; i < p.size(); ++i) z[i] = std::max(z[i], 0.0);
  }
  return z;
}

// Greedy exchange repair of a nearly complementary basis: a violated index
// is toggled, alone or swapped against one basic index, while that lowers
// the residual. Pivot-tolerance skips in Lemke leave bases one exchange
// away from a certified one.
inline std::optional<Solution> repair_basis(const Problem& p, std::vector<int> basis, double tol,
                                            int rounds = 8, int candidates = 8) {
  const int m = p.equality_count;
  const int c = p.complementary_size();
  auto evaluate = [&](const std::vector<int>& b) -> std::optional<std::pair<double, VectorXd>> {
    const auto z = basis_solution(p, b, false);
    if (!z) return std::nullopt;
    return std::pair{residual(p, *z), *z};
  };
  std::sort(basis.begin(), basis.end());
  auto current = evaluate(basis);
  if (!current) return std::nullopt;
  for (int round = 0; round < rounds && current->first > tol; ++round) {
    const VectorXd w = p.M * current->second + p.q;
    std::vector<std::pair<double, int>> violated;
    for (int k = 0; k < c; ++k) {
      const bool basic = std::binary_search(basis.begin(), basis.end(), k);
      const double v = basic ? -current->second[m + k] : -w[m + k];
      if (v > 0.0) violated.emplace_back(-v, k);
    }
    std::sort(violated.begin(), violated.end());
    if (violated.size() > static_cast<size_t>(candidates)) violated.resize(candidates);
    auto toggled = [&](int a, int b) {
      std::vector<int> out = basis;
      for (int x : {a, b}) {
        if (x < 0) continue;
        const auto it = std::lower_bound(out.begin(), out.end(), x);
        if (it != out.end() && *it == x) out.erase(it);
        else out.insert(it, x);
      }
      return out;
    };
    std::vector<int> best_basis;
    auto best = current;
    for (const auto& [neg_v, k] : violated) {
      for (int j = -1; j < static_cast<int>(basis.size()); ++j) {
        const int other = j < 0 ? -1 : basis[j];
        if (other == k) continue;
        const std::vector<int> b = toggled(k, other);
        if (auto e = evaluate(b); e && e->first < best->first) {
          best = e;
          best_basis = b;
        }
      }
    }
    if (best_basis.empty()) break;
    basis = std::move(best_basis);
    current = best;
  }
  if (!(current->first <= tol)) return std::nullopt;
  Solution s;
  s.z = current->second;
  for (int i = m; i < p.size(); ++i) s.z[i] = std::max(s.z[i], 0.0);
  s.residual = residual(p, s.z, &s.w);
  if (!(s.residual <= tol)) return std::nullopt;
  s.status = Status::kSolved;
  s.basis = basis;
  return s;
}

inline Solution solve_lemke(const Problem& p, const LemkeOptions& opt = {}) {
  const Reduced red(p);
  const int n = static_cast<int>(red.q.size());
  const detail::Scaling sc = detail::equilibrate(red.M);
  const MatrixXd Ms = sc.row.asDiagonal() * red.M * sc.col.asDiagonal();
  const VectorXd qs = sc.row.cwiseProduct(red.q);
  const VectorXd ones = VectorXd::Ones(n);

  // Degenerate ties can be broken the wrong way by round-off; a failed
  // certificate is retried with other pivot tolerances and scalings.
  struct Attempt {
    const MatrixXd* M;
    const VectorXd* q;
    const VectorXd* col;
    double pivot_tol;
  };
  const Attempt attempts[] = {{&Ms, &qs, &sc.col, 1e-7},
                              {&Ms, &qs, &sc.col, 1e-5},
                              {&red.M, &red.q, &ones, 1e-7},
                              {&Ms, &qs, &sc.col, 1e-10},
                              {&red.M, &red.q, &ones, 1e-9}};
  Solution best;
  int pivots = 0;
  bool first = true;
  std::vector<std::vector<int>> tried;
  for (const Attempt& at : attempts) {
    detail::LemkeRun run = detail::lemke_pure(*at.M, *at.q, opt.max_pivots, at.pivot_tol);
    pivots += run.pivots;
    if (run.status == Status::kSolved) tried.push_back(run.basis);
    Solution s = finalize(p, red, at.col->cwiseProduct(run.zc), run.status, opt.tol, &run.basis);
    s.basis = run.basis;
    if (first || s.status == Status::kSolved || s.residual < best.residual) best = s;
    first = false;
    if (s.status == Status::kSolved) break;
  }
  best.iterations = pivots;
  if (best.status != Status::kSolved) {
    for (const std::vector<int>& b : tried) {
      if (auto fixed = repair_basis(p, b, opt.tol)) {
        fixed->iterations = pivots;
        return *fixed;
      }
    }
  }
  if (best.status != Status::kSolved && opt.regularize_on_failure) {
    const double eps = 1e-10 * std::max(1.0, Ms.norm());
    const MatrixXd Mreg = Ms + eps * MatrixXd::Identity(n, n);
    detail::LemkeRun rrun = detail::lemke_pure(Mreg, qs, opt.max_pivots);
    Solution r =
        finalize(p, red, sc.col.cwiseProduct(rrun.zc), rrun.status, opt.tol, &rrun.basis);
    r.iterations = pivots + rrun.pivots;
    r.basis = rrun.basis;
    r.regularized = true;
    if (r.status == Status::kSolved || r.residual < best.residual) return r;
  }
  return best;
}

// Solve assuming the given complementary z indices are basic and every other
// complementary variable is zero. Returns a solution only if it certifies.
inline std::optional<Solution> solve_from_basis(const Problem& p, const std::vector<int>& basis,
                                                double tol) {
  const auto z = basis_solution(p, basis);
  if (!z) return std::nullopt;
  Solution s;
  s.z = *z;
  s.residual = residual(p, s.z, &s.w);
  if (!(s.residual <= tol)) return std::nullopt;
  s.status = Status::kSolved;
  s.basis = basis;
  return s;
}

struct PgsOptions {
  double tol = 1e-9;
  int max_iters = 10000;
  double relaxation = 1.0;
};

inline Solution solve_pgs(const Problem& p, const PgsOptions& opt = {}) {
  const Reduced red(p);
  const int n = static_cast<int>(red.q.size());
  for (int i = 0; i < n; ++i) {
    if (red.M(i, i) == 0.0) {
      throw std::invalid_argument("solve_pgs: zero diagonal in row " + std::to_string(i));
    }
  }
  VectorXd zc = VectorXd::Zero(n);
  Solution s;
  for (int it = 1; it <= opt.max_iters; ++it) {
    for (int i = 0; i < n; ++i) {
      const double wi = red.M.row(i).dot(zc) + red.q[i];
      zc[i] = std::max(0.0, zc[i] - opt.relaxation * wi / red.M(i, i));
    }
    s = finalize(p, red, zc, Status::kSolved, opt.tol);
    s.iterations = it;
    if (s.status == Status::kSolved) return s;
  }
  s.status = Status::kIterationLimit;
  return s;
}

// Every certified complementary-basis solution (pure bases only).
inline std::vector<Solution> solve_enumerate(const Problem& p, double tol = 1e-9) {
  if (p.complementary_size() > 20) {
    throw DimensionError("solve_enumerate: " + std::to_string(p.complementary_size()) +
                         " complementary variables exceeds the limit of 20");
  }
  const Reduced red(p);
  const int n = static_cast<int>(red.q.size());
  std::vector<Solution> out;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    std::vector<int> basis;
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) basis.push_back(i);
    }
    VectorXd zc = VectorXd::Zero(n);
    if (!basis.empty()) {
      const int k = static_cast<int>(basis.size());
      MatrixXd A(k, k);
      VectorXd b(k);
      for (int i = 0; i < k; ++i) {
        b[i] = -red.q[basis[i]];
        for (int j = 0; j < k; ++j) A(i, j) = red.M(basis[i], basis[j]);
      }
      Eigen::FullPivLU<MatrixXd> lu(A);
      if (!lu.isInvertible()) continue;
      const VectorXd zb = lu.solve(b);
      for (int i = 0; i < k; ++i) zc[basis[i]] = zb[i];
    }
    Solution s = finalize(p, red, zc, Status::kSolved, tol);
    if (s.status == Status::kSolved) {
      s.basis = basis;
      out.push_back(std::move(s));
    }
  }
  return out;
}

// Debug dump of a (failed) solve: one block per quantity.
inline void dump_csv(const std::string& path, const Problem& p, const Solution& s) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << std::setprecision(17);
  f << "# status," << to_string(s.status) << ",residual," << s.residual
    << ",equality_count," << p.equality_count << "\n";
  f << "# M\n";
  for (int i = 0; i < p.M.rows(); ++i) {
    for (int j = 0; j < p.M.cols(); ++j) f << (j ? "," : "") << p.M(i, j);
    f << "\n";
  }
  auto vec = [&](const char* name, const VectorXd& v) {
    f << "# " << name << "\n";
    for (int i = 0; i < v.size(); ++i) f << (i ? "," : "") << v[i];
    f << "\n";
  };
  vec("q", p.q);
  vec("z", s.z);
  vec("w", s.w);
}

}  // namespace prehensile::lcp

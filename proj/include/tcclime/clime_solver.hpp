#pragma once

// The CLIME column program
//
//     minimize ||w||_1   subject to   ||A w - b||_inf <= lambda
//
// written as a standard-form LP in (u, v) >= 0 with w = u - v. Its dual,
//
//     maximize  b'z - lambda ||z||_1   subject to   ||A'z||_inf <= 1,
//
// has the origin as a feasible vertex, so the dense tableau simplex below runs
// on the dual from the slack basis with no phase one. The primal solution is
// read off the optimal basis as its simplex multipliers.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "tcclime/matrix.hpp"

namespace tcclime {

struct ColumnProblem {
  Matrix a;
  Vector b;
  double lambda = 0.0;

  void validate() const {
    require(a.rows() == a.cols(), Errc::dimension_mismatch, "column problem needs square A");
    require(b.size() == a.rows(), Errc::dimension_mismatch, "column problem b has wrong length");
    require(lambda >= 0.0 && std::isfinite(lambda), Errc::invalid_argument, "lambda must be finite and >= 0");
    require(a.allFinite() && b.allFinite(), Errc::invalid_argument, "column problem entries must be finite");
  }
};

enum class SolveStatus { optimal, infeasible, numerical_failure };

struct ColumnSolution {
  Vector omega;
  double objective = 0.0;
  double max_violation = 0.0;
  SolveStatus status = SolveStatus::optimal;
  int iterations = 0;
};

inline constexpr double kFeasibilityTol = 1e-7;
inline constexpr double kObjectiveTol = 1e-6;
inline constexpr double kPivotTol = 1e-10;

namespace detail {

class DualTableau {
 public:
  // Dual of min 1'x s.t. Gx <= h, x >= 0, with G = [A -A; -A A], h = [b+l; l-b].
  // Dual variables y (m = 2p of them) and slacks s (m). Constraint -G'y <= 1.
  DualTableau(const Matrix& a, const Vector& b, double lambda)
      : p_(a.rows()), m_(2 * p_), cols_(2 * m_ + 1), t_(static_cast<std::size_t>((m_ + 1) * cols_), 0.0),
        basis_(static_cast<std::size_t>(m_)) {
    // -G' = [-A'  A'; A'  -A']; row i of -G' pairs with primal variable x_i.
    for (Eigen::Index i = 0; i < p_; ++i) {
      for (Eigen::Index k = 0; k < p_; ++k) {
        const double v = a(k, i);  // (A')_{ik}
        at(i, k) = -v;
        at(i, p_ + k) = v;
        at(p_ + i, k) = v;
        at(p_ + i, p_ + k) = -v;
      }
    }
    for (Eigen::Index i = 0; i < m_; ++i) {
      at(i, m_ + i) = 1.0;
      at(i, rhs_col()) = 1.0;
      basis_[static_cast<std::size_t>(i)] = m_ + i;
    }
    // Objective row holds z_j - d_j with d = -h.
    for (Eigen::Index k = 0; k < p_; ++k) {
      at(m_, k) = b[k] + lambda;
      at(m_, p_ + k) = lambda - b[k];
    }
  }

  enum class Outcome { optimal, unbounded, iteration_limit };

  Outcome run(int max_iter, int& iterations) {
    int degenerate_run = 0;
    for (iterations = 0; iterations < max_iter; ++iterations) {
      const bool bland = degenerate_run > kBlandAfter;
      const Eigen::Index e = entering(bland);
      if (e < 0) return Outcome::optimal;
      const Eigen::Index r = leaving(e, bland);
      if (r < 0) return Outcome::unbounded;
      const double step = at(r, rhs_col()) / at(r, e);
      degenerate_run = step <= 1e-12 ? degenerate_run + 1 : 0;
      pivot(r, e);
    }
    return Outcome::iteration_limit;
  }

  const std::vector<Eigen::Index>& basis() const noexcept { return basis_; }
  Eigen::Index variables() const noexcept { return m_; }

  /// Simplex multipliers as stored in the objective row under the slack columns.
  Vector multipliers() const {
    Vector x(m_);
    for (Eigen::Index i = 0; i < m_; ++i) x[i] = at(m_, m_ + i);
    return x;
  }

 private:
  static constexpr int kBlandAfter = 25;

  double& at(Eigen::Index r, Eigen::Index c) { return t_[static_cast<std::size_t>(r * cols_ + c)]; }
  double at(Eigen::Index r, Eigen::Index c) const { return t_[static_cast<std::size_t>(r * cols_ + c)]; }
  Eigen::Index rhs_col() const noexcept { return cols_ - 1; }

  Eigen::Index entering(bool bland) const {
    Eigen::Index best = -1;
    double best_val = -kPivotTol;
    for (Eigen::Index j = 0; j < 2 * m_; ++j) {
      const double r = at(m_, j);
      if (r < best_val) {
        best = j;
        if (bland) break;
        best_val = r;
      }
    }
    return best;
  }

  Eigen::Index leaving(Eigen::Index e, bool bland) const {
    Eigen::Index best = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    double best_piv = 0.0;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const double piv = at(i, e);
      if (piv <= kPivotTol) continue;
      const double ratio = at(i, rhs_col()) / piv;
      if (best < 0 || ratio < best_ratio - 1e-12) {
        best = i;
        best_ratio = ratio;
        best_piv = piv;
      } else if (ratio <= best_ratio + 1e-12) {
        const bool take = bland ? basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(best)]
                                : piv > best_piv;
        if (take) {
          best = i;
          best_ratio = std::min(best_ratio, ratio);
          best_piv = piv;
        }
      }
    }
    return best;
  }

  void pivot(Eigen::Index r, Eigen::Index e) {
    double* prow = &t_[static_cast<std::size_t>(r * cols_)];
    const double inv = 1.0 / prow[e];
    for (Eigen::Index c = 0; c < cols_; ++c) prow[c] *= inv;
    prow[e] = 1.0;
    for (Eigen::Index i = 0; i <= m_; ++i) {
      if (i == r) continue;
      double* row = &t_[static_cast<std::size_t>(i * cols_)];
      const double f = row[e];
      if (f == 0.0) continue;
      for (Eigen::Index c = 0; c < cols_; ++c) row[c] -= f * prow[c];
      row[e] = 0.0;
      if (i < m_ && row[rhs_col()] < 0.0) row[rhs_col()] = 0.0;
    }
    basis_[static_cast<std::size_t>(r)] = e;
  }

  Eigen::Index p_, m_, cols_;
  std::vector<double> t_;
  std::vector<Eigen::Index> basis_;
};

// Primal x from the optimal dual basis: solve B' x = d_B using fresh data.
inline bool recover_primal(const Matrix& a, const Vector& b, double lambda,
                           const std::vector<Eigen::Index>& basis, Vector& x) {
  const Eigen::Index p = a.rows();
  const Eigen::Index m = 2 * p;
  Matrix bt(m, m);  // B transposed: row k is basic column k
  Vector db(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const Eigen::Index j = basis[static_cast<std::size_t>(k)];
    bt.row(k).setZero();
    if (j >= m) {
      bt(k, j - m) = 1.0;
      db[k] = 0.0;
    } else if (j < p) {
      // column j of -G': (-A'e_j ... ) -> entries (-A(j, .), A(j, .))
      bt.row(k).head(p) = -a.row(j);
      bt.row(k).tail(p) = a.row(j);
      db[k] = -(b[j] + lambda);
    } else {
      const Eigen::Index jj = j - p;
      bt.row(k).head(p) = a.row(jj);
      bt.row(k).tail(p) = -a.row(jj);
      db[k] = -(lambda - b[jj]);
    }
  }
  Eigen::PartialPivLU<Matrix> lu(bt);
  x = lu.solve(db);
  return x.allFinite() && (bt * x - db).cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, db.cwiseAbs().maxCoeff());
}

inline ColumnSolution finish(const Matrix& a, const Vector& b, Vector omega, SolveStatus status, int iters) {
  ColumnSolution s;
  s.omega = std::move(omega);
  s.objective = s.omega.lpNorm<1>();
  s.max_violation = (a * s.omega - b).lpNorm<Eigen::Infinity>();
  s.status = status;
  s.iterations = iters;
  return s;
}

}  // namespace detail

/// Solves one column program exactly. Infeasibility and solver stalls are
/// reported through `status`; callers that need exceptions use solve_matrix.
inline ColumnSolution solve_column(const ColumnProblem& prob) {
  prob.validate();
  const Eigen::Index p = prob.a.rows();
  if (p == 0) return detail::finish(prob.a, prob.b, Vector(0), SolveStatus::optimal, 0);
  // w = 0 is optimal whenever it is feasible.
  if (prob.b.lpNorm<Eigen::Infinity>() <= prob.lambda) {
    return detail::finish(prob.a, prob.b, Vector::Zero(p), SolveStatus::optimal, 0);
  }

  detail::DualTableau tab(prob.a, prob.b, prob.lambda);
  int iters = 0;
  const int cap = std::max(2000, static_cast<int>(60 * p));
  const auto outcome = tab.run(cap, iters);
  if (outcome == detail::DualTableau::Outcome::unbounded) {
    return detail::finish(prob.a, prob.b, Vector::Zero(p), SolveStatus::infeasible, iters);
  }
  if (outcome == detail::DualTableau::Outcome::iteration_limit) {
    return detail::finish(prob.a, prob.b, Vector::Zero(p), SolveStatus::numerical_failure, iters);
  }

  Vector x;
  if (!detail::recover_primal(prob.a, prob.b, prob.lambda, tab.basis(), x)) x = tab.multipliers();
  x = x.cwiseMax(0.0);
  Vector omega = x.head(p) - x.tail(p);
  auto sol = detail::finish(prob.a, prob.b, std::move(omega), SolveStatus::optimal, iters);
  if (sol.max_violation > prob.lambda + kFeasibilityTol) {
    // Fall back to the tableau's own multipliers before giving up.
    Vector y = tab.multipliers().cwiseMax(0.0);
    auto alt = detail::finish(prob.a, prob.b, Vector(y.head(p) - y.tail(p)), SolveStatus::optimal, iters);
    if (alt.max_violation <= prob.lambda + kFeasibilityTol) return alt;
    sol.status = SolveStatus::numerical_failure;
  }
  return sol;
}

/// Column-wise solve of ||A W - B||_max <= lambda. Columns run independently on
/// up to `threads` workers; the result does not depend on the thread count.
inline Matrix solve_matrix(const Matrix& a, const Matrix& b, double lambda, unsigned threads = 1) {
  require(a.rows() == a.cols() && b.rows() == a.rows(), Errc::dimension_mismatch,
          "solve_matrix dimensions disagree");
  const Eigen::Index p = b.cols();
  Matrix out(a.rows(), p);
  std::vector<SolveStatus> status(static_cast<std::size_t>(p), SolveStatus::optimal);

  auto work = [&](Eigen::Index j) {
    ColumnProblem prob{a, b.col(j), lambda};
    auto sol = solve_column(prob);
    status[static_cast<std::size_t>(j)] = sol.status;
    out.col(j) = sol.omega;
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<Eigen::Index>(p, 1))));
  if (threads == 1) {
    for (Eigen::Index j = 0; j < p; ++j) work(j);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (Eigen::Index j = t; j < p; j += threads) work(j);
      });
    }
    for (auto& th : pool) th.join();
  }

  std::string bad;
  Errc code = Errc::infeasible;
  std::size_t first = 0;
  for (std::size_t j = 0; j < status.size(); ++j) {
    if (status[j] == SolveStatus::optimal) continue;
    if (bad.empty()) first = j;
    if (status[j] == SolveStatus::numerical_failure) code = Errc::numerical_failure;
    bad += (bad.empty() ? "" : ",") + std::to_string(j);
  }
  if (!bad.empty()) {
    throw ColumnError(code, first, "column program failed for columns [" + bad + "] at lambda=" + format_double(lambda));
  }
  return out;
}

}  // namespace tcclime

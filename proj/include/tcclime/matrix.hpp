#pragma once

// Dense symmetric linear algebra shared by the estimators and the simulator.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tcclime/error.hpp"

namespace tcclime {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline double max_norm(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

/// Symmetric dense matrix. Construction checks near-symmetry and stores the
/// exact average of A and its transpose.
class SymMatrix {
 public:
  SymMatrix() = default;

  explicit SymMatrix(const Matrix& a, double tol = 1e-9) {
    require(a.rows() == a.cols(), Errc::dimension_mismatch, "SymMatrix requires a square matrix");
    require(all_finite(a), Errc::invalid_argument, "SymMatrix entries must be finite");
    const double scale = std::max(1.0, max_norm(a));
    require(max_norm(a - a.transpose()) <= tol * scale, Errc::invalid_argument,
            "matrix is not symmetric");
    m_ = 0.5 * (a + a.transpose());
  }

  /// Forces symmetry with (M + M^T)/2 regardless of how asymmetric M is.
  static SymMatrix symmetrize(const Matrix& a) {
    require(a.rows() == a.cols(), Errc::dimension_mismatch, "symmetrize requires a square matrix");
    return SymMatrix(Matrix(0.5 * (a + a.transpose())));
  }

  static SymMatrix identity(Eigen::Index p) { return SymMatrix(Matrix::Identity(p, p)); }

  Eigen::Index dim() const noexcept { return m_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
  const Matrix& matrix() const noexcept { return m_; }

  friend bool operator==(const SymMatrix& a, const SymMatrix& b) { return a.m_ == b.m_; }

 private:
  Matrix m_;
};

/// Symmetric matrix with unit diagonal and entries in [-1, 1].
class CorrelationMatrix {
 public:
  CorrelationMatrix() = default;

  explicit CorrelationMatrix(SymMatrix base) : base_(std::move(base)) {
    const Matrix& m = base_.matrix();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      require(m(i, i) == 1.0, Errc::invalid_argument, "correlation diagonal must be exactly 1");
    }
    require(m.size() == 0 || m.cwiseAbs().maxCoeff() <= 1.0, Errc::invalid_argument,
            "correlation entries must lie in [-1, 1]");
  }

  explicit CorrelationMatrix(const Matrix& m) : CorrelationMatrix(SymMatrix(m)) {}

  static CorrelationMatrix identity(Eigen::Index p) {
    return CorrelationMatrix(SymMatrix::identity(p));
  }

  Eigen::Index dim() const noexcept { return base_.dim(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return base_(i, j); }
  const Matrix& matrix() const noexcept { return base_.matrix(); }
  const SymMatrix& sym() const noexcept { return base_; }

  friend bool operator==(const CorrelationMatrix& a, const CorrelationMatrix& b) {
    return a.base_ == b.base_;
  }

 private:
  SymMatrix base_;
};

struct LowerTriangular {
  Matrix l;
};

struct SymEigen {
  Vector values;   // descending
  Matrix vectors;  // orthonormal columns, column i pairs with values[i]
};

inline constexpr double kCholeskyPivotFloor = 1e-12;
inline constexpr double kDefaultPdEps = 1e-3;

inline LowerTriangular cholesky(const SymMatrix& a) {
  const Matrix& m = a.matrix();
  const Eigen::Index p = m.rows();
  Matrix l = Matrix::Zero(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double d = m(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > kCholeskyPivotFloor)) {
      throw Error(Errc::not_positive_definite,
                  "Cholesky pivot " + std::to_string(j) + " is " + std::to_string(d));
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < p; ++i) {
      l(i, j) = (m(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
    }
  }
  return {std::move(l)};
}

/// log det of a PD matrix through its Cholesky factor.
inline double log_det_pd(const SymMatrix& a) {
  const LowerTriangular f = cholesky(a);
  return 2.0 * f.l.diagonal().array().log().sum();
}

inline SymEigen eigen_sym(const SymMatrix& a) {
  // Householder tridiagonalization followed by implicit symmetric QR.
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a.matrix());
  if (solver.info() != Eigen::Success) {
    throw Error(Errc::no_convergence, "symmetric eigensolver did not converge");
  }
  const Eigen::Index p = a.dim();
  SymEigen out{Vector(p), Matrix(p, p)};
  for (Eigen::Index i = 0; i < p; ++i) {
    out.values[i] = solver.eigenvalues()[p - 1 - i];
    out.vectors.col(i) = solver.eigenvectors().col(p - 1 - i);
  }
  return out;
}

inline double min_eigenvalue(const SymMatrix& a) {
  const SymEigen e = eigen_sym(a);
  return e.values[e.values.size() - 1];
}

/// Eigenvalue clipping at eps. Inputs already at or above the floor come back unchanged.
inline SymMatrix pd_project(const SymMatrix& a, double eps = kDefaultPdEps) {
  require(eps > 0.0, Errc::invalid_argument, "pd_project eps must be positive");
  const SymEigen e = eigen_sym(a);
  if (e.values.size() == 0 || e.values[e.values.size() - 1] >= eps) return a;
  const Vector clipped = e.values.cwiseMax(eps);
  return SymMatrix::symmetrize(e.vectors * clipped.asDiagonal() * e.vectors.transpose());
}

inline CorrelationMatrix rescale_to_correlation(const SymMatrix& a) {
  const Matrix& m = a.matrix();
  const Eigen::Index p = m.rows();
  Vector s(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    if (!(m(i, i) > 0.0)) {
      throw Error(Errc::non_positive_diagonal, "diagonal entry " + std::to_string(i) + " is not positive");
    }
    s[i] = std::sqrt(m(i, i));
  }
  Matrix out(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    out(j, j) = 1.0;
    for (Eigen::Index i = j + 1; i < p; ++i) {
      const double v = std::clamp(m(i, j) / (s[i] * s[j]), -1.0, 1.0);
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return CorrelationMatrix(SymMatrix(out));
}

inline SymMatrix invert_pd(const SymMatrix& a) {
  const LowerTriangular f = cholesky(a);
  const Eigen::Index p = a.dim();
  auto tri = f.l.triangularView<Eigen::Lower>();
  Matrix inv = tri.solve(Matrix::Identity(p, p));
  inv = f.l.transpose().triangularView<Eigen::Upper>().solve(inv);
  return SymMatrix::symmetrize(inv);
}

// ---------------------------------------------------------------------------
// Matrix CSV: no header, p rows of p comma-separated values, 17 significant digits.

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_matrix_csv(std::ostream& os, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) os << ',';
      os << format_double(m(i, j));
    }
    os << '\n';
  }
}

inline void write_matrix_csv(const std::string& path, const Matrix& m) {
  std::ofstream os(path);
  require(static_cast<bool>(os), Errc::io_error, "cannot open " + path + " for writing");
  write_matrix_csv(os, m);
  require(static_cast<bool>(os), Errc::io_error, "write failed for " + path);
}

inline double parse_double_cell(const std::string& cell, std::size_t row, std::size_t col) {
  std::size_t pos = 0;
  double v = 0.0;
  std::string trimmed = cell;
  trimmed.erase(0, trimmed.find_first_not_of(" \t\r"));
  trimmed.erase(trimmed.find_last_not_of(" \t\r") + 1);
  try {
    v = std::stod(trimmed, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (trimmed.empty() || pos != trimmed.size() || !std::isfinite(v)) {
    throw Error(Errc::parse_error, "non-numeric cell '" + cell + "' at row " + std::to_string(row) +
                                       ", column " + std::to_string(col));
  }
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline Matrix read_matrix_csv(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    std::vector<double> vals;
    vals.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) vals.push_back(parse_double_cell(cells[c], row, c + 1));
    if (!rows.empty() && vals.size() != rows.front().size()) {
      throw Error(Errc::parse_error, "row " + std::to_string(row) + " has " + std::to_string(vals.size()) +
                                         " columns, expected " + std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(vals));
  }
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = r ? static_cast<Eigen::Index>(rows.front().size()) : 0;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rows[i][j];
  return m;
}

inline Matrix read_matrix_csv(const std::string& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), Errc::io_error, "cannot open " + path);
  return read_matrix_csv(is);
}

}  // namespace tcclime

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace agpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

// ===========================================================================
// Small shared numeric helpers
// ===========================================================================

[[nodiscard]] inline Matrix symmetrized(const Matrix& m) {
  return 0.5 * (m + m.transpose());
}

/// Largest eigenvalue of a symmetric matrix.
[[nodiscard]] inline double max_eigenvalue(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

/// Smallest eigenvalue of a symmetric matrix.
[[nodiscard]] inline double min_eigenvalue(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// Spectral norm of a symmetric matrix (largest |eigenvalue|).
[[nodiscard]] inline double spectral_norm_sym(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Spectral norm (largest singular value) of a general matrix.
[[nodiscard]] inline double spectral_norm(const Matrix& m) {
  return std::sqrt(std::max(0.0, max_eigenvalue(symmetrized(m.transpose() * m))));
}

[[nodiscard]] inline bool is_symmetric(const Matrix& m, double tol = 1e-9) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

/// Symmetric positive definiteness via an in-place Cholesky factorization
/// with pivot threshold 1e-12 * trace.
[[nodiscard]] inline bool is_spd(const Matrix& m) {
  const auto d = m.rows();
  if (d == 0 || m.cols() != d) return false;
  if (!is_symmetric(m)) return false;
  if (!(m.trace() > 0.0)) return false;
  const double pivot_floor = 1e-12 * m.trace();
  Matrix l = m;
  for (Eigen::Index j = 0; j < d; ++j) {
    const double pivot = l(j, j) - l.row(j).head(j).squaredNorm();
    if (!(pivot > pivot_floor)) return false;
    l(j, j) = std::sqrt(pivot);
    for (Eigen::Index i = j + 1; i < d; ++i) {
      l(i, j) = (l(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
    }
  }
  return true;
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

}  // namespace agpc

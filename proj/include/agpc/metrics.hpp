#pragma once

#include "agpc/core.hpp"

#include <utility>

namespace agpc {

// ===========================================================================
// Stacked-state diagnostics built on the complete-graph projection
// ===========================================================================

namespace detail {

/// Per-agent deviations from the fleet mean: y_i = x_i - xbar.
[[nodiscard]] inline Matrix mean_deviations(const Vector& x, int n) {
  require(n >= 1 && x.size() % n == 0, "state size must be a multiple of N");
  const auto d = x.size() / n;
  Matrix y(d, n);
  for (int i = 0; i < n; ++i) y.col(i) = x.segment(i * d, d);
  const Vector xbar = y.rowwise().mean();
  y.colwise() -= xbar;
  return y;
}

/// x^T ((I - ones*ones^T/N) kron S) x for symmetric S, evaluated as
/// sum_i y_i^T S y_i with y_i the deviations from the mean.
[[nodiscard]] inline double projection_quadratic(const Vector& x, int n, const Matrix& s) {
  const Matrix y = mean_deviations(x, n);
  require(s.rows() == y.rows() && s.cols() == y.rows(), "weight matrix size mismatch");
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += y.col(i).dot(s * y.col(i));
  return total;
}

}  // namespace detail

/// Instantaneous performance-cost integrand x^T (2 L_N kron Q) x, equal to
/// (1/N) * sum over ordered pairs of (x_k - x_i)^T Q (x_k - x_i).
[[nodiscard]] inline double cost_rate(const Vector& x, const Matrix& q, int n) {
  return 2.0 * detail::projection_quadratic(x, n, q);
}

/// sqrt(x^T (L_N kron I) x): the norm of the disagreement component,
/// zero exactly when all agents agree.
[[nodiscard]] inline double disagreement_norm(const Vector& x, int n) {
  const Matrix y = detail::mean_deviations(x, n);
  return y.norm();
}

/// Orthogonal split x = x_c + x_cbar into consensus (mean replicated) and
/// disagreement components.
[[nodiscard]] inline std::pair<Vector, Vector> disagreement_decomposition(const Vector& x,
                                                                          int n) {
  require(n >= 1 && x.size() % n == 0, "state size must be a multiple of N");
  const auto d = x.size() / n;
  Vector xbar = Vector::Zero(d);
  for (int i = 0; i < n; ++i) xbar += x.segment(i * d, d);
  xbar /= n;
  Vector consensus(x.size());
  for (int i = 0; i < n; ++i) consensus.segment(i * d, d) = xbar;
  return {consensus, x - consensus};
}

}  // namespace agpc

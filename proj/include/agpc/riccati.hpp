#pragma once

#include "agpc/core.hpp"

#include <complex>
#include <optional>
#include <utility>

namespace agpc {

// ===========================================================================
// Plant/spec/gain types
// ===========================================================================

struct PlantModel {
  Matrix A, B;
  int d = 0, p = 0;

  PlantModel() = default;

  PlantModel(Matrix a, Matrix b) : A(std::move(a)), B(std::move(b)) {
    require(A.rows() >= 1 && A.rows() == A.cols(), "A must be square and nonempty");
    require(B.rows() == A.rows() && B.cols() >= 1, "B must be d x p with p >= 1");
    d = static_cast<int>(A.rows());
    p = static_cast<int>(B.cols());
  }
};

struct PerformanceSpec {
  Matrix Q;
  double gamma = 0.0;           // translation factor, > 0 on direct synthesis paths
  std::optional<double> eps;    // certificate cap for the bounded-gain search
  double mu = 0.0;              // Lipschitz constant of the agent nonlinearity
};

enum class GainMode { linear, lipschitz };

/// Protocol gains plus the SPD matrix that certifies them.
struct GainSet {
  Matrix K_u, K_w, certificate;
  double gamma = 0.0;
  GainMode mode = GainMode::linear;

  GainSet() = default;

  GainSet(Matrix ku, Matrix kw, Matrix cert, double gamma_used, GainMode gain_mode)
      : K_u(std::move(ku)),
        K_w(std::move(kw)),
        certificate(std::move(cert)),
        gamma(gamma_used),
        mode(gain_mode) {
    require(K_u.cols() == K_w.rows() && K_w.rows() == K_w.cols(),
            "gain dimensions inconsistent");
    require(certificate.rows() == K_w.rows() && certificate.cols() == K_w.cols(),
            "certificate dimensions inconsistent");
    const double scale = std::max(1.0, K_w.cwiseAbs().maxCoeff());
    require(is_symmetric(K_w, 1e-9 * scale), "K_w must be symmetric");
    require(min_eigenvalue(symmetrized(K_w)) >= -1e-10 * scale,
            "K_w must be positive semidefinite");
  }
};

struct LmiMargin {
  double value = 0.0;        // largest eigenvalue of the assembled block matrix
  bool feasible = false;     // value < -1e-9
  bool input_norm_ok = true; // lambda_max(B B^T) <= 1 (reported, not enforced)
};

/// Strictness buffer for certificates meant to satisfy the block-matrix
/// feasibility predicate: an exact equality solution sits on the feasibility
/// boundary (the assembled block matrix is singular), so searches that demand
/// margin < -1e-9 inflate the constant term by this much instead.
inline constexpr double kInteriorSlack = 1e-5;

inline constexpr double kFeasibilityTol = 1e-9;

// ===========================================================================
// Continuous algebraic Riccati equation via the Hamiltonian Schur method
// ===========================================================================

namespace detail {

/// Swap the diagonal entries k, k+1 of a complex Schur form by a unitary
/// similarity, updating T and the accumulated basis U.
inline void swap_adjacent(ComplexMatrix& t, ComplexMatrix& u, int k) {
  const std::complex<double> a = t(k, k);
  const std::complex<double> b = t(k + 1, k + 1);
  const std::complex<double> c = t(k, k + 1);
  // [c; b - a] is an eigenvector of [[a, c], [0, b]] for eigenvalue b.
  const std::complex<double> x1 = c;
  const std::complex<double> x2 = b - a;
  const double r = std::hypot(std::abs(x1), std::abs(x2));
  const double scale = std::abs(a) + std::abs(b) + 1.0;
  if (r <= 1e-15 * scale) return;  // equal eigenvalues: order is immaterial
  Eigen::Matrix2cd g;
  g << x1 / r, -std::conj(x2) / r,  //
      x2 / r, std::conj(x1) / r;
  t.middleRows(k, 2) = g.adjoint() * t.middleRows(k, 2);
  t.middleCols(k, 2) = t.middleCols(k, 2) * g;
  u.middleCols(k, 2) = u.middleCols(k, 2) * g;
  t(k + 1, k) = 0.0;
}

/// Reorder a complex Schur form so eigenvalues with Re < 0 come first.
inline void move_stable_first(ComplexMatrix& t, ComplexMatrix& u) {
  const int n = static_cast<int>(t.rows());
  int front = 0;
  for (int j = 0; j < n; ++j) {
    if (t(j, j).real() >= 0.0) continue;
    for (int k = j; k > front; --k) swap_adjacent(t, u, k - 1);
    ++front;
  }
}

/// Solve A^T Y + Y A + C = 0 for stable A (real) and symmetric C,
/// by back-substitution on the complex Schur form of A.
[[nodiscard]] inline Matrix solve_lyapunov(const Matrix& a, const Matrix& c) {
  const auto n = a.rows();
  Eigen::ComplexSchur<ComplexMatrix> schur(a.cast<std::complex<double>>(), /*computeU=*/true);
  require(schur.info() == Eigen::Success, "Schur decomposition failed");
  const ComplexMatrix& t = schur.matrixT();
  const ComplexMatrix& u = schur.matrixU();
  const ComplexMatrix ctilde = u.adjoint() * c * u;
  const ComplexMatrix th = t.adjoint();
  ComplexMatrix y(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    ComplexVector rhs = -ctilde.col(j);
    for (Eigen::Index k = 0; k < j; ++k) rhs -= t(k, j) * y.col(k);
    ComplexMatrix lhs = th;
    lhs.diagonal().array() += t(j, j);
    y.col(j) = lhs.triangularView<Eigen::Lower>().solve(rhs);
  }
  return symmetrized((u * y * u.adjoint()).real());
}

/// Stabilizing solution X of X A + A^T X - X M X + Q_eff = 0 with symmetric
/// M (possibly indefinite) and Q_eff: stable invariant subspace of the
/// Hamiltonian [[A, -M], [-Q_eff, -A^T]], then Newton refinement.
[[nodiscard]] inline Matrix solve_care_general(const Matrix& a, const Matrix& m,
                                               const Matrix& q_eff) {
  const auto d = a.rows();
  require(a.cols() == d && m.rows() == d && m.cols() == d && q_eff.rows() == d &&
              q_eff.cols() == d,
          "dimension mismatch");
  Matrix h(2 * d, 2 * d);
  h << a, -m, -q_eff, -a.transpose();

  Eigen::ComplexSchur<ComplexMatrix> schur(h.cast<std::complex<double>>(), /*computeU=*/true);
  if (schur.info() != Eigen::Success) throw std::runtime_error("no stabilizing solution");
  ComplexMatrix t = schur.matrixT();
  ComplexMatrix u = schur.matrixU();

  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  Eigen::Index stable = 0;
  for (Eigen::Index j = 0; j < 2 * d; ++j) {
    const double re = t(j, j).real();
    if (std::abs(re) <= 1e-9 * scale) throw std::runtime_error("no stabilizing solution");
    stable += re < 0.0;
  }
  if (stable != d) throw std::runtime_error("no stabilizing solution");

  move_stable_first(t, u);
  const ComplexMatrix s1 = u.topLeftCorner(d, d);
  const ComplexMatrix s2 = u.bottomLeftCorner(d, d);
  Eigen::FullPivLU<ComplexMatrix> lu(s1.transpose());
  if (!lu.isInvertible()) throw std::runtime_error("no stabilizing solution");
  Matrix x = symmetrized(ComplexMatrix(lu.solve(s2.transpose()).transpose()).real());

  // Newton refinement: solve (A - M X)^T D + D (A - M X) + residual = 0.
  for (int it = 0; it < 10; ++it) {
    const Matrix residual =
        symmetrized(a.transpose() * x + x * a - x * m * x + q_eff);
    if (spectral_norm_sym(residual) <= 1e-13 * std::max(1.0, spectral_norm_sym(x))) break;
    x = symmetrized(x + solve_lyapunov(a - m * x, residual));
  }
  return x;
}

inline void check_care_residual(const Matrix& a, const Matrix& m, const Matrix& q_eff,
                                const Matrix& x) {
  const Matrix residual = symmetrized(a.transpose() * x + x * a - x * m * x + q_eff);
  if (spectral_norm_sym(residual) > 1e-8 * (1.0 + spectral_norm_sym(x))) {
    throw std::runtime_error("riccati residual too large");
  }
}

[[nodiscard]] inline bool input_norm_ok(const Matrix& b) {
  return max_eigenvalue(symmetrized(b * b.transpose())) <= 1.0 + 1e-12;
}

}  // namespace detail

/// Stabilizing SPD solution R of R A + A^T R - weight * R B B^T R + Q_eff = 0.
[[nodiscard]] inline Matrix solve_care(const Matrix& a, const Matrix& b,
                                       const Matrix& q_eff, double weight) {
  require(weight > 0.0, "weight must be positive");
  require(b.rows() == a.rows(), "B row count must match A");
  require(is_symmetric(q_eff), "Q_eff must be symmetric");
  const Matrix m = symmetrized(weight * (b * b.transpose()));
  const Matrix r = detail::solve_care_general(a, m, q_eff);
  if (!is_spd(r)) throw std::runtime_error("solution not positive definite");
  detail::check_care_residual(a, m, q_eff, r);
  return r;
}

// ===========================================================================
// Inequality residuals and block-matrix feasibility margins
// ===========================================================================

/// Signed largest eigenvalue of the certificate's Riccati-inequality
/// left-hand side; <= tolerance certifies the inequality.
///   linear:    R A + A^T R - gamma R B B^T R + 2 Q
///   lipschitz: P A + A^T P - P (gamma B B^T - I) P + 2 Q + mu^2 I
[[nodiscard]] inline double riccati_residual(const Matrix& certificate,
                                             const PlantModel& plant,
                                             const PerformanceSpec& spec, GainMode mode) {
  require(is_symmetric(certificate), "certificate must be symmetric");
  require(certificate.rows() == plant.d, "certificate size must match the plant");
  require(spec.Q.rows() == plant.d && spec.Q.cols() == plant.d, "Q size must match the plant");
  const Matrix bbt = symmetrized(plant.B * plant.B.transpose());
  Matrix lhs = certificate * plant.A + plant.A.transpose() * certificate + 2.0 * spec.Q;
  if (mode == GainMode::linear) {
    lhs -= spec.gamma * certificate * bbt * certificate;
  } else {
    const Matrix m = spec.gamma * bbt - Matrix::Identity(plant.d, plant.d);
    lhs -= certificate * m * certificate;
    lhs += spec.mu * spec.mu * Matrix::Identity(plant.d, plant.d);
  }
  return max_eigenvalue(symmetrized(lhs));
}

/// Feasibility margin of the 2d x 2d block matrix
///   [[A Rt + Rt A^T - gamma B B^T, 2 Rt Q], [2 Q Rt, -2 Q]].
[[nodiscard]] inline LmiMargin lmi_margin_linear(const Matrix& rtilde, double gamma,
                                                 const PlantModel& plant, const Matrix& q) {
  require(is_symmetric(rtilde), "Rtilde must be symmetric");
  require(rtilde.rows() == plant.d, "Rtilde size must match the plant");
  require(q.rows() == plant.d && q.cols() == plant.d, "Q size must match the plant");
  const int d = plant.d;
  const Matrix bbt = symmetrized(plant.B * plant.B.transpose());
  Matrix xi(2 * d, 2 * d);
  xi.topLeftCorner(d, d) = plant.A * rtilde + rtilde * plant.A.transpose() - gamma * bbt;
  xi.topRightCorner(d, d) = 2.0 * rtilde * q;
  xi.bottomLeftCorner(d, d) = xi.topRightCorner(d, d).transpose();
  xi.bottomRightCorner(d, d) = -2.0 * q;
  LmiMargin margin;
  margin.value = max_eigenvalue(symmetrized(xi));
  margin.feasible = margin.value < -kFeasibilityTol;
  margin.input_norm_ok = detail::input_norm_ok(plant.B);
  return margin;
}

/// Feasibility margin of the 3d x 3d block matrix
///   [[A Pt + Pt A^T - gamma B B^T + I, 2 Pt Q, mu Pt],
///    [2 Q Pt, -2 Q, 0], [mu Pt, 0, -I]].
[[nodiscard]] inline LmiMargin lmi_margin_lipschitz(const Matrix& ptilde, double gamma,
                                                    const PlantModel& plant, const Matrix& q,
                                                    double mu) {
  require(is_symmetric(ptilde), "Ptilde must be symmetric");
  require(ptilde.rows() == plant.d, "Ptilde size must match the plant");
  require(q.rows() == plant.d && q.cols() == plant.d, "Q size must match the plant");
  const int d = plant.d;
  const Matrix bbt = symmetrized(plant.B * plant.B.transpose());
  Matrix xi = Matrix::Zero(3 * d, 3 * d);
  xi.topLeftCorner(d, d) = plant.A * ptilde + ptilde * plant.A.transpose() - gamma * bbt +
                           Matrix::Identity(d, d);
  xi.block(0, d, d, d) = 2.0 * ptilde * q;
  xi.block(d, 0, d, d) = xi.block(0, d, d, d).transpose();
  xi.block(0, 2 * d, d, d) = mu * ptilde;
  xi.block(2 * d, 0, d, d) = xi.block(0, 2 * d, d, d).transpose();
  xi.block(d, d, d, d) = -2.0 * q;
  xi.block(2 * d, 2 * d, d, d) = -Matrix::Identity(d, d);
  LmiMargin margin;
  margin.value = max_eigenvalue(symmetrized(xi));
  margin.feasible = margin.value < -kFeasibilityTol;
  margin.input_norm_ok = detail::input_norm_ok(plant.B);
  return margin;
}

// ===========================================================================
// Gain synthesis
// ===========================================================================

namespace detail {

[[nodiscard]] inline GainSet gains_from_certificate(const PlantModel& plant,
                                                    const Matrix& certificate, double gamma,
                                                    GainMode mode) {
  const Matrix ku = plant.B.transpose() * certificate;
  // K_w is the Gram matrix of the coupling gain: the weight-adaptation rate
  // is the squared norm of the coupling signal. Building it from K_u keeps
  // that identity exact at any certificate scale.
  const Matrix kw = ku.transpose() * ku;
  return GainSet(ku, kw, certificate, gamma, mode);
}

}  // namespace detail

/// Gains from the equality form of the linear-case Riccati condition:
/// R A + A^T R - gamma R B B^T R + 2 Q = 0, K_u = B^T R, K_w = R B B^T R.
/// A positive `interior_slack` inflates the constant term so the certificate
/// lands strictly inside the feasible set instead of on its boundary.
[[nodiscard]] inline GainSet synthesize_linear(const PlantModel& plant,
                                               const PerformanceSpec& spec,
                                               double interior_slack = 0.0) {
  require(spec.gamma > 0.0, "gamma must be positive");
  require(interior_slack >= 0.0, "interior slack must be nonnegative");
  require(is_spd(spec.Q), "Q not positive definite");
  const Matrix q_eff =
      2.0 * spec.Q + interior_slack * Matrix::Identity(plant.d, plant.d);
  const Matrix r = solve_care(plant.A, plant.B, q_eff, spec.gamma);
  GainSet gains = detail::gains_from_certificate(plant, r, spec.gamma, GainMode::linear);
  if (riccati_residual(r, plant, spec, GainMode::linear) > 1e-8) {
    throw std::runtime_error("riccati residual too large");
  }
  return gains;
}

/// Gains from the equality form of the Lipschitz-case Riccati condition:
/// P A + A^T P - P (gamma B B^T - I) P + 2 Q + mu^2 I = 0. A positive
/// `interior_slack` inflates the constant term so the certificate lands
/// strictly inside the feasible set instead of on its boundary.
[[nodiscard]] inline GainSet synthesize_lipschitz(const PlantModel& plant,
                                                  const PerformanceSpec& spec,
                                                  double interior_slack = 0.0) {
  require(spec.gamma > 0.0, "gamma must be positive");
  require(spec.mu >= 0.0, "mu must be nonnegative");
  require(interior_slack >= 0.0, "interior slack must be nonnegative");
  require(is_spd(spec.Q), "Q not positive definite");
  const int d = plant.d;
  const Matrix m =
      symmetrized(spec.gamma * (plant.B * plant.B.transpose())) - Matrix::Identity(d, d);
  const Matrix q_eff =
      2.0 * spec.Q + (spec.mu * spec.mu + interior_slack) * Matrix::Identity(d, d);
  const Matrix p = detail::solve_care_general(plant.A, m, q_eff);
  if (!is_spd(p)) throw std::runtime_error("solution not positive definite");
  detail::check_care_residual(plant.A, m, q_eff, p);
  GainSet gains = detail::gains_from_certificate(plant, p, spec.gamma, GainMode::lipschitz);
  if (riccati_residual(p, plant, spec, GainMode::lipschitz) > 1e-8) {
    throw std::runtime_error("riccati residual too large");
  }
  return gains;
}

struct EpsSynthesis {
  double gamma = 0.0;
  GainSet gains;
  LmiMargin margin;
};

namespace detail {

inline constexpr double kGammaGridLow = 1e-2;
inline constexpr double kGammaGridHigh = 1e4;
inline constexpr double kGammaGridRatio = 1.1;

template <class TryGamma>
[[nodiscard]] EpsSynthesis eps_grid_search(TryGamma&& try_gamma) {
  for (double gamma = kGammaGridLow; gamma <= kGammaGridHigh; gamma *= kGammaGridRatio) {
    std::optional<EpsSynthesis> hit = try_gamma(gamma);
    if (hit) return *hit;
  }
  throw std::runtime_error("no feasible gamma in search range");
}

}  // namespace detail

/// Bounded-gain linear synthesis: ascending geometric search over gamma,
/// accepting the first equality solution R with lambda_max(R) <= eps whose
/// inverse passes the 2-block feasibility margin.
[[nodiscard]] inline EpsSynthesis synthesize_linear_eps(const PlantModel& plant,
                                                        const Matrix& q, double eps) {
  require(eps > 0.0, "eps must be positive");
  require(is_spd(q), "Q not positive definite");
  require(detail::input_norm_ok(plant.B), "input-matrix normalization violated");
  const Matrix q_eff =
      2.0 * q + kInteriorSlack * Matrix::Identity(plant.d, plant.d);
  return detail::eps_grid_search([&](double gamma) -> std::optional<EpsSynthesis> {
    Matrix r;
    try {
      r = solve_care(plant.A, plant.B, q_eff, gamma);
    } catch (const std::runtime_error&) {
      return std::nullopt;
    }
    if (max_eigenvalue(r) > eps + kFeasibilityTol) return std::nullopt;
    const Matrix rtilde = symmetrized(r.inverse());
    const LmiMargin margin = lmi_margin_linear(rtilde, gamma, plant, q);
    if (!margin.feasible) return std::nullopt;
    return EpsSynthesis{gamma, detail::gains_from_certificate(plant, r, gamma, GainMode::linear),
                        margin};
  });
}

/// Bounded-gain Lipschitz synthesis: as the linear search, with the
/// Lipschitz Riccati and the 3-block feasibility margin.
[[nodiscard]] inline EpsSynthesis synthesize_lipschitz_eps(const PlantModel& plant,
                                                           const Matrix& q, double eps,
                                                           double mu) {
  require(eps > 0.0, "eps must be positive");
  require(mu >= 0.0, "mu must be nonnegative");
  require(is_spd(q), "Q not positive definite");
  require(detail::input_norm_ok(plant.B), "input-matrix normalization violated");
  const int d = plant.d;
  const Matrix q_eff = 2.0 * q + (mu * mu + kInteriorSlack) * Matrix::Identity(d, d);
  return detail::eps_grid_search([&](double gamma) -> std::optional<EpsSynthesis> {
    const Matrix m =
        symmetrized(gamma * (plant.B * plant.B.transpose())) - Matrix::Identity(d, d);
    Matrix p;
    try {
      p = detail::solve_care_general(plant.A, m, q_eff);
      if (!is_spd(p)) return std::nullopt;
      detail::check_care_residual(plant.A, m, q_eff, p);
    } catch (const std::runtime_error&) {
      return std::nullopt;
    }
    if (max_eigenvalue(p) > eps + kFeasibilityTol) return std::nullopt;
    const Matrix ptilde = symmetrized(p.inverse());
    const LmiMargin margin = lmi_margin_lipschitz(ptilde, gamma, plant, q, mu);
    if (!margin.feasible) return std::nullopt;
    return EpsSynthesis{gamma,
                        detail::gains_from_certificate(plant, p, gamma, GainMode::lipschitz),
                        margin};
  });
}

}  // namespace agpc

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "invad/dag.hpp"
#include "invad/modes.hpp"

namespace invad {

// Dense reference implementations. Nothing here goes through the sparse
// step kernels: Jacobians are multiplied out as explicit matrices and
// solves use a pivoted LU.

/// ||got - expected||_inf / max(1, ||expected||_inf)
template <typename A, typename B>
double relative_error(const Eigen::MatrixBase<A>& got,
                      const Eigen::MatrixBase<B>& expected) {
  const double scale = std::max(1.0, expected.cwiseAbs().maxCoeff());
  return (got - expected).cwiseAbs().maxCoeff() / scale;
}

/// Full-state Jacobian of the trace at x as the product of explicit
/// per-step matrices.
Eigen::MatrixXd dense_jacobian(const Trace& trace, const State& x);

/// Output-by-input Jacobian of the DAG at x by dense forward accumulation
/// of gradient rows.
Eigen::MatrixXd dense_jacobian(const Dag& dag, const State& x);

/// Central differences, step 1e-6 * max(1, |x_j|). Passive slots are held
/// fixed, so their columns are unit vectors.
Eigen::MatrixXd finite_difference_jacobian(const Trace& trace, const State& x);
Eigen::MatrixXd finite_difference_jacobian(const Dag& dag, const State& x);

inline constexpr double kOraclePivotTol = 1e-12;

/// Solves M w = v. Throws SingularMatrixError if any LU pivot is at most
/// 1e-12 * ||M||_inf.
Eigen::VectorXd dense_solve(const Eigen::MatrixXd& m, const Eigen::VectorXd& v);
Eigen::MatrixXd dense_inverse(const Eigen::MatrixXd& m);

/// True when dense_solve would reject `m`.
bool is_numerically_singular(const Eigen::MatrixXd& m);

struct ModeReport {
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  /// Max relative error against the dense products, indexed by Mode.
  std::array<double, 4> max_error{};
  bool inverse_checked = false;
  /// <vjp(ybar), xdot> vs <ybar, jvp(xdot)> and the starred analogue.
  double dot_identity_error = 0.0;
  double starred_dot_identity_error = 0.0;
  /// Worst of the four forward/inverse round trips.
  double composition_error = 0.0;
  /// Set when an inverse mode refused a step.
  std::optional<std::size_t> singular_step;
  bool oracle_singular = false;
  std::optional<std::string> failure;

  static constexpr double kModeTol = 1e-8;
  static constexpr double kDotTol = 1e-10;
  static constexpr double kCompositionTol = 1e-8;

  /// Singular programs pass when the oracle agrees they are singular.
  bool passed() const;
};

/// Compares the four modes against the dense oracle on `trials` seeded
/// random vectors, and checks the dot-product and round-trip identities.
ModeReport compare_modes(const Trace& trace, const State& x,
                         std::size_t trials, std::uint64_t seed);
ModeReport compare_modes(const Dag& dag, const State& x, std::size_t trials,
                         std::uint64_t seed);

}  // namespace invad

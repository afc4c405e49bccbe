#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "invad/lumpify.hpp"
#include "invad/modes.hpp"

namespace invad {

/// Right-hand side g of dx/dt = g(x), given as a square trace over the
/// state. Passive slots are side parameters: g is zero there.
class VectorField {
 public:
  explicit VectorField(Trace g);

  std::size_t dimension() const noexcept { return g_.width(); }
  const Trace& trace() const noexcept { return g_; }

  State operator()(const State& x) const;
  /// J_g(x) v
  State jvp(const State& x, const State& v) const;
  /// J_g(x)^T w
  State vjp(const State& x, const State& w) const;

 private:
  State masked(State v) const;

  Trace g_;
};

struct OdeProblem {
  VectorField field;
  double t0 = 0.0;
  double t1 = 1.0;
  double dt = 1e-3;
  State x0;

  /// Number of Euler steps: (t1 - t0) / dt rounded up, where values within
  /// 1e-9 relative of an integer count as that integer.
  std::size_t steps() const;
  /// The step actually used, (t1 - t0) / steps().
  double effective_dt() const;
};

enum class InverseStep {
  FirstOrder,  // I - dt J_g, the O(dt^2)-per-step expansion
  ExactSolve   // exact (I + dt J_g)^-1 through inverse AD of the Euler map
};

/// States x_0 .. x_K of explicit Euler.
std::vector<State> integrate_primal(const OdeProblem& p);

/// xdot(T1) from xdot(T0).
State ode_forward_tangent(const OdeProblem& p, const State& xdot0);

/// xbar(T0) from xbar(T1).
State ode_reverse_cotangent(const OdeProblem& p, const State& xbar1);

/// xdot*(T0) from ydot*(T1): approximately J_flow^-1 ydot*.
State ode_reverse_inverse(const OdeProblem& p, const State& ydot_star1,
                          InverseStep step = InverseStep::FirstOrder);

/// ybar*(T1) from xbar*(T0): approximately J_flow^-T xbar*.
State ode_forward_inverse(const OdeProblem& p, const State& xbar_star0,
                          InverseStep step = InverseStep::FirstOrder);

namespace detail {
/// v + h J_g(x) v. Tangent and reverse-inverse steps both use this; they
/// differ only in the sign of h and the direction of integration.
State tangent_step(const VectorField& g, const State& x, const State& v, double h);
/// w + h J_g(x)^T w. Shared by cotangent and forward-inverse steps.
State cotangent_step(const VectorField& g, const State& x, const State& w, double h);
}  // namespace detail

enum class OdeMode { Primal, Tangent, Cotangent, ReverseInverse, ForwardInverse };

const char* ode_mode_name(OdeMode mode) noexcept;

/// Runs one ODE mode. Primal ignores `v` and returns x(T1).
State run_ode_mode(const OdeProblem& p, OdeMode mode, const State& v,
                   InverseStep step = InverseStep::FirstOrder);

struct ConvergenceRow {
  double dt = 0.0;
  double error = 0.0;
  /// log(err_prev / err) / log(dt_prev / dt); absent on the first row or
  /// when either error is zero.
  std::optional<double> order;
};

/// Error of `mode` against `reference` for each dt (strictly decreasing).
/// Without a reference, each run is compared with a run at half its dt.
std::vector<ConvergenceRow> convergence_report(
    const OdeProblem& p, OdeMode mode, std::span<const double> dts,
    const State& v, const std::optional<State>& reference = std::nullopt);

}  // namespace invad

#include "invad/newton.hpp"

#include <limits>

namespace invad {

State newton_step(const Trace& f, const State& x, double singular_tol) {
  const State fx = run_primal(f, x);
  return x - jvp_inverse(f, x, fx, ModeOptions{singular_tol});
}

NewtonResult newton_solve(const Trace& f, const State& x0, const NewtonConfig& cfg) {
  if (cfg.max_iters < 1 || !(cfg.abs_tol > 0.0) || !(cfg.singular_tol > 0.0)) {
    throw ValidationError("Newton needs max_iters >= 1 and positive tolerances");
  }
  f.require_invertible_shape();
  NewtonResult result{x0, 0, {}};
  State best = x0;
  double best_residual = std::numeric_limits<double>::infinity();
  State x = x0;
  for (;;) {
    const State fx = run_primal(f, x);
    const double residual = fx.size() == 0 ? 0.0 : fx.cwiseAbs().maxCoeff();
    result.residual_history.push_back(residual);
    if (residual < best_residual) {
      best_residual = residual;
      best = x;
    }
    if (residual <= cfg.abs_tol) break;
    if (result.iterations == cfg.max_iters) throw MaxItersExceeded(best, best_residual);
    x = x - jvp_inverse(f, x, fx, ModeOptions{cfg.singular_tol});
    ++result.iterations;
  }
  result.root = x;
  return result;
}

}  // namespace invad

#pragma once

#include <cstddef>
#include <vector>

#include "invad/modes.hpp"

namespace invad {

struct NewtonConfig {
  std::size_t max_iters = 50;
  double abs_tol = 1e-12;  // on ||f(x)||_inf
  double singular_tol = kDefaultSingularTol;
};

struct NewtonResult {
  State root;
  std::size_t iterations = 0;
  /// ||f(x_k)||_inf for x_0 .. x_iterations.
  std::vector<double> residual_history;
};

/// x - J^-1 f(x), with J^-1 applied by reverse-inverse accumulation.
State newton_step(const Trace& f, const State& x,
                  double singular_tol = kDefaultSingularTol);

/// Undamped Newton iteration. Throws MaxItersExceeded carrying the iterate
/// with the smallest residual.
NewtonResult newton_solve(const Trace& f, const State& x0,
                          const NewtonConfig& cfg = {});

}  // namespace invad

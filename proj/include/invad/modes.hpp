#pragma once

#include <vector>

#include <Eigen/Core>

#include "invad/trace.hpp"

namespace invad {

/// The four accumulation modes, named by the product each one computes.
///
///   Forward         J v      (tangent, primal order, no tape)
///   Reverse         J^T v    (cotangent, reverse order, taped)
///   ForwardInverse  J^-T v   (starred cotangent, primal order, no tape)
///   ReverseInverse  J^-1 v   (starred tangent, reverse order, taped)
enum class Mode { Forward, Reverse, ForwardInverse, ReverseInverse };

const char* mode_name(Mode mode) noexcept;

/// True for modes whose sweep runs in primal order.
constexpr bool runs_forward(Mode mode) noexcept {
  return mode == Mode::Forward || mode == Mode::ForwardInverse;
}

constexpr bool is_inverse(Mode mode) noexcept {
  return mode == Mode::ForwardInverse || mode == Mode::ReverseInverse;
}

/// Slot roles of one overwrite step: `written` is R, `others` are the
/// remaining active sources S_1..S_{k-1}, aligned with StepLinearization::bs.
struct StepPattern {
  SlotId written;
  std::vector<SlotId> others;
};

StepPattern step_pattern(const Instruction& instr);

/// Slots whose derivative entry a mode's step kernel may assign.
/// Forward and ReverseInverse touch only R; Reverse and ForwardInverse
/// touch R and every S.
std::vector<SlotId> kernel_write_set(Mode mode, const StepPattern& pattern);

/// One step of any mode applied in place to a derivative vector. This is
/// the single dispatch table shared by every evaluator in the library.
template <typename Derived>
void apply_step(Mode mode, const StepPattern& p, const StepLinearization& lin,
                Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const auto r = p.written.index;
  switch (mode) {
    case Mode::Forward: {
      Scalar acc = lin.a * v(r);
      for (std::size_t i = 0; i < p.others.size(); ++i) {
        acc += lin.bs[i] * v(p.others[i].index);
      }
      v(r) = acc;
      break;
    }
    case Mode::Reverse: {
      const Scalar vr = v(r);
      for (std::size_t i = 0; i < p.others.size(); ++i) {
        v(p.others[i].index) += lin.bs[i] * vr;
      }
      v(r) = lin.a * vr;
      break;
    }
    case Mode::ForwardInverse: {
      const Scalar wr = v(r) / lin.a;
      for (std::size_t i = 0; i < p.others.size(); ++i) {
        v(p.others[i].index) -= lin.bs[i] * wr;
      }
      v(r) = wr;
      break;
    }
    case Mode::ReverseInverse: {
      Scalar acc = v(r);
      for (std::size_t i = 0; i < p.others.size(); ++i) {
        acc -= lin.bs[i] * v(p.others[i].index);
      }
      v(r) = acc / lin.a;
      break;
    }
  }
}

struct ModeOptions {
  double singular_tol = kDefaultSingularTol;
};

/// ydot = J xdot, computed alongside the primal.
State jvp(const Trace& trace, const State& x, const State& xdot);

/// xbar = J^T ybar, sweeping a primal tape backwards.
State vjp(const Trace& trace, const State& x, const State& ybar);

/// xdot* = J^-1 ydot*, sweeping a primal tape backwards.
State jvp_inverse(const Trace& trace, const State& x, const State& ydot_star,
                  const ModeOptions& opts = {});

/// ybar* = J^-T xbar*, computed alongside the primal.
State vjp_inverse(const Trace& trace, const State& x, const State& xbar_star,
                  const ModeOptions& opts = {});

/// Dispatches to one of the four evaluators above.
State evaluate_mode(Mode mode, const Trace& trace, const State& x,
                    const State& v, const ModeOptions& opts = {});

/// Reverse sweeps without a tape: each pre-step state is rebuilt from the
/// post-step state through the op's local inverse. Requires every step to
/// be invertible and every op to register a local inverse.
State vjp_tapeless(const Trace& trace, const State& x, const State& ybar,
                   const ModeOptions& opts = {});
State jvp_inverse_tapeless(const Trace& trace, const State& x,
                           const State& ydot_star,
                           const ModeOptions& opts = {});

/// Recovers the pre-step state of instruction `step` from its post-step
/// state, in place.
void unapply_instruction(const Instruction& instr, State& state,
                         std::size_t step = kNoStep);

}  // namespace invad

#include "invad/modes.hpp"

#include <array>
#include <string>

namespace invad {

const char* mode_name(Mode mode) noexcept {
  switch (mode) {
    case Mode::Forward: return "jvp";
    case Mode::Reverse: return "vjp";
    case Mode::ForwardInverse: return "vjp-inv";
    case Mode::ReverseInverse: return "jvp-inv";
  }
  return "?";
}

StepPattern step_pattern(const Instruction& instr) {
  StepPattern p{instr.dest, {}};
  for (std::size_t i = 0; i < instr.srcs.size(); ++i) {
    if (instr.active[i] && instr.srcs[i] != instr.dest) {
      p.others.push_back(instr.srcs[i]);
    }
  }
  return p;
}

std::vector<SlotId> kernel_write_set(Mode mode, const StepPattern& pattern) {
  std::vector<SlotId> out{pattern.written};
  if (mode == Mode::Reverse || mode == Mode::ForwardInverse) {
    out.insert(out.end(), pattern.others.begin(), pattern.others.end());
  }
  return out;
}

namespace {

void check_sizes(const Trace& trace, const State& x, const State& v) {
  const auto n = static_cast<Eigen::Index>(trace.width());
  if (x.size() != n || v.size() != n) {
    throw ValidationError("state and derivative vectors need " +
                          std::to_string(n) + " entries");
  }
}

StepLinearization checked_linearization(const Instruction& instr,
                                        const State& pre, std::size_t step,
                                        bool need_invertible, double tol) {
  StepLinearization lin = linearize_step(instr, pre, step);
  if (need_invertible && !is_step_invertible(lin, tol)) {
    throw SingularStepError(step, std::abs(lin.a));
  }
  return lin;
}

// Primal-order sweep: primal and derivative advance together, no tape.
State sweep_forward(Mode mode, const Trace& trace, const State& x,
                    const State& v, const ModeOptions& opts) {
  check_sizes(trace, x, v);
  const bool inverse = is_inverse(mode);
  if (inverse) trace.require_invertible_shape();
  State state = x;
  State w = v;
  for (std::size_t t = 0; t < trace.size(); ++t) {
    const Instruction& instr = trace[t];
    const auto lin =
        checked_linearization(instr, state, t, inverse, opts.singular_tol);
    apply_step(mode, step_pattern(instr), lin, w);
    apply_instruction(instr, state, t);
  }
  return w;
}

State sweep_reverse(Mode mode, const Trace& trace, const State& x,
                    const State& v, const ModeOptions& opts) {
  check_sizes(trace, x, v);
  const bool inverse = is_inverse(mode);
  if (inverse) trace.require_invertible_shape();
  const PrimalResult primal = eval_primal(trace, x);
  State w = v;
  for (std::size_t t = trace.size(); t-- > 0;) {
    const Instruction& instr = trace[t];
    const auto lin = checked_linearization(instr, primal.tape.pre_state(t), t,
                                           inverse, opts.singular_tol);
    apply_step(mode, step_pattern(instr), lin, w);
  }
  return w;
}

State sweep_reverse_tapeless(Mode mode, const Trace& trace, const State& x,
                             const State& v, const ModeOptions& opts) {
  check_sizes(trace, x, v);
  trace.require_invertible_shape();
  State state = run_primal(trace, x);
  State w = v;
  for (std::size_t t = trace.size(); t-- > 0;) {
    const Instruction& instr = trace[t];
    unapply_instruction(instr, state, t);
    const auto lin =
        checked_linearization(instr, state, t, true, opts.singular_tol);
    apply_step(mode, step_pattern(instr), lin, w);
  }
  return w;
}

}  // namespace

void unapply_instruction(const Instruction& instr, State& state,
                         std::size_t step) {
  const BasisOp& op = *instr.op;
  if (!op.has_local_inverse()) throw NoLocalInverseError(op.name);
  std::array<double, 2> args{};
  std::size_t pos = 0;
  for (std::size_t i = 0; i < instr.srcs.size(); ++i) {
    args[i] = state[instr.srcs[i].index];
    if (instr.srcs[i] == instr.dest) pos = i;
  }
  const double result = state[instr.dest.index];
  const auto pre = op.local_inverse(
      pos, result, std::span<const double>(args.data(), instr.srcs.size()),
      instr.literal);
  if (!pre) throw SingularStepError(step, 0.0);
  state[instr.dest.index] = *pre;
}

State jvp(const Trace& trace, const State& x, const State& xdot) {
  return sweep_forward(Mode::Forward, trace, x, xdot, {});
}

State vjp(const Trace& trace, const State& x, const State& ybar) {
  return sweep_reverse(Mode::Reverse, trace, x, ybar, {});
}

State jvp_inverse(const Trace& trace, const State& x, const State& ydot_star,
                  const ModeOptions& opts) {
  return sweep_reverse(Mode::ReverseInverse, trace, x, ydot_star, opts);
}

State vjp_inverse(const Trace& trace, const State& x, const State& xbar_star,
                  const ModeOptions& opts) {
  return sweep_forward(Mode::ForwardInverse, trace, x, xbar_star, opts);
}

State evaluate_mode(Mode mode, const Trace& trace, const State& x,
                    const State& v, const ModeOptions& opts) {
  return runs_forward(mode) ? sweep_forward(mode, trace, x, v, opts)
                            : sweep_reverse(mode, trace, x, v, opts);
}

State vjp_tapeless(const Trace& trace, const State& x, const State& ybar,
                   const ModeOptions& opts) {
  return sweep_reverse_tapeless(Mode::Reverse, trace, x, ybar, opts);
}

State jvp_inverse_tapeless(const Trace& trace, const State& x,
                           const State& ydot_star, const ModeOptions& opts) {
  return sweep_reverse_tapeless(Mode::ReverseInverse, trace, x, ydot_star,
                                opts);
}

}  // namespace invad

#include "invad/oracle.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <random>

#include "invad/lumpify.hpp"

namespace invad {

Eigen::MatrixXd dense_jacobian(const Trace& trace, const State& x) {
  const auto n = static_cast<Eigen::Index>(trace.width());
  if (x.size() != n) throw ValidationError("state size does not match trace width");
  Eigen::MatrixXd j = Eigen::MatrixXd::Identity(n, n);
  State state = x;
  for (std::size_t t = 0; t < trace.size(); ++t) {
    const Instruction& instr = trace[t];
    std::array<double, 2> args{};
    for (std::size_t i = 0; i < instr.srcs.size(); ++i) args[i] = state[instr.srcs[i].index];
    const std::span<const double> view(args.data(), instr.srcs.size());
    if (!instr.op->in_domain(view, instr.literal)) throw DomainError(t, instr.op->name);
    const auto partials = instr.op->partials(view, instr.literal);

    Eigen::MatrixXd step = Eigen::MatrixXd::Identity(n, n);
    step.row(instr.dest.index).setZero();
    for (std::size_t i = 0; i < instr.srcs.size(); ++i) {
      if (instr.active[i]) step(instr.dest.index, instr.srcs[i].index) += partials[i];
    }
    j = step * j;
    state[instr.dest.index] = instr.op->eval(view, instr.literal);
  }
  return j;
}

Eigen::MatrixXd dense_jacobian(const Dag& dag, const State& x) {
  const auto values = evaluate_values(dag, x);
  const auto n = static_cast<Eigen::Index>(dag.num_inputs());
  std::vector<Eigen::RowVectorXd> grad(dag.num_values());
  for (Eigen::Index i = 0; i < n; ++i) grad[i] = Eigen::RowVectorXd::Unit(n, i);
  for (std::size_t i = 0; i < dag.num_nodes(); ++i) {
    const DagNode& node = dag.node(i);
    std::array<double, 2> args{};
    for (std::size_t a = 0; a < node.inputs.size(); ++a) args[a] = values[node.inputs[a]];
    const auto partials = node.op->partials(
        std::span<const double>(args.data(), node.inputs.size()), node.literal);
    Eigen::RowVectorXd g = Eigen::RowVectorXd::Zero(n);
    for (std::size_t a = 0; a < node.inputs.size(); ++a) g += partials[a] * grad[node.inputs[a]];
    grad[dag.value_of(i)] = std::move(g);
  }
  Eigen::MatrixXd j(static_cast<Eigen::Index>(dag.outputs().size()), n);
  for (std::size_t r = 0; r < dag.outputs().size(); ++r) {
    j.row(static_cast<Eigen::Index>(r)) = grad[dag.outputs()[r]];
  }
  return j;
}

namespace {

Eigen::MatrixXd central_differences(
    const std::function<State(const State&)>& f, const State& x,
    const std::function<bool(Eigen::Index)>& held) {
  const State y0 = f(x);
  Eigen::MatrixXd j(y0.size(), x.size());
  for (Eigen::Index c = 0; c < x.size(); ++c) {
    if (held(c)) {
      j.col(c) = Eigen::VectorXd::Unit(y0.size(), c);
      continue;
    }
    const double h = 1e-6 * std::max(1.0, std::abs(x[c]));
    State xp = x, xm = x;
    xp[c] += h;
    xm[c] -= h;
    j.col(c) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return j;
}

}  // namespace

Eigen::MatrixXd finite_difference_jacobian(const Trace& trace, const State& x) {
  return central_differences(
      [&](const State& s) { return run_primal(trace, s); }, x,
      [&](Eigen::Index c) { return trace.is_passive(SlotId(static_cast<std::size_t>(c))); });
}

Eigen::MatrixXd finite_difference_jacobian(const Dag& dag, const State& x) {
  return central_differences([&](const State& s) { return evaluate_dag(dag, s); },
                             x, [](Eigen::Index) { return false; });
}

namespace {

Eigen::PartialPivLU<Eigen::MatrixXd> checked_lu(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw ValidationError("dense solve needs a square matrix");
  const double norm = m.size() == 0 ? 0.0 : m.cwiseAbs().rowwise().sum().maxCoeff();
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  const auto pivots = lu.matrixLU().diagonal().cwiseAbs();
  for (Eigen::Index i = 0; i < pivots.size(); ++i) {
    if (!(pivots[i] > kOraclePivotTol * norm)) {
      throw SingularMatrixError("matrix is singular to working precision (pivot " +
                                detail::format_real(pivots[i]) + ")");
    }
  }
  return lu;
}

}  // namespace

Eigen::VectorXd dense_solve(const Eigen::MatrixXd& m, const Eigen::VectorXd& v) {
  if (v.size() != m.rows()) throw ValidationError("dense solve: size mismatch");
  return checked_lu(m).solve(v);
}

Eigen::MatrixXd dense_inverse(const Eigen::MatrixXd& m) {
  return checked_lu(m).inverse();
}

bool is_numerically_singular(const Eigen::MatrixXd& m) {
  try {
    checked_lu(m);
    return false;
  } catch (const SingularMatrixError&) {
    return true;
  }
}

bool ModeReport::passed() const {
  if (failure) return false;
  if (singular_step || oracle_singular) return singular_step.has_value() && oracle_singular;
  const std::size_t modes = inverse_checked ? 4 : 2;
  for (std::size_t m = 0; m < modes; ++m) {
    if (!(max_error[m] <= kModeTol)) return false;
  }
  if (!(dot_identity_error <= kDotTol)) return false;
  if (inverse_checked) {
    if (!(starred_dot_identity_error <= kDotTol)) return false;
    if (!(composition_error <= kCompositionTol)) return false;
  }
  return true;
}

namespace {

using ModeFn = std::function<State(Mode, const State&)>;

double dot_error(double lhs, double rhs) {
  return std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs));
}

ModeReport compare_impl(const Eigen::MatrixXd& j, const ModeFn& eval,
                        bool inverse_shape, std::size_t trials,
                        std::uint64_t seed) {
  ModeReport report;
  report.trials = trials;
  report.seed = seed;
  const Eigen::Index n = j.rows();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const auto random_vector = [&] {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
  };
  const auto idx = [](Mode m) { return static_cast<std::size_t>(m); };

  std::optional<Eigen::PartialPivLU<Eigen::MatrixXd>> lu, lu_t;
  if (inverse_shape) {
    report.oracle_singular = is_numerically_singular(j);
    if (!report.oracle_singular) {
      lu.emplace(j);
      lu_t.emplace(j.transpose());
    }
  }

  try {
    for (std::size_t trial = 0; trial < trials; ++trial) {
      const Eigen::VectorXd xdot = random_vector();
      const Eigen::VectorXd ybar = random_vector();
      const State fwd = eval(Mode::Forward, xdot);
      const State rev = eval(Mode::Reverse, ybar);
      auto& err = report.max_error;
      err[idx(Mode::Forward)] = std::max(err[idx(Mode::Forward)], relative_error(fwd, j * xdot));
      err[idx(Mode::Reverse)] =
          std::max(err[idx(Mode::Reverse)], relative_error(rev, j.transpose() * ybar));
      report.dot_identity_error = std::max(report.dot_identity_error,
                                           dot_error(rev.dot(xdot), ybar.dot(fwd)));
      if (!inverse_shape) continue;

      const Eigen::VectorXd ydot_star = random_vector();
      const Eigen::VectorXd xbar_star = random_vector();
      const State rinv = eval(Mode::ReverseInverse, ydot_star);
      const State finv = eval(Mode::ForwardInverse, xbar_star);
      report.inverse_checked = true;
      if (lu) {
        err[idx(Mode::ReverseInverse)] = std::max(
            err[idx(Mode::ReverseInverse)], relative_error(rinv, Eigen::VectorXd(lu->solve(ydot_star))));
        err[idx(Mode::ForwardInverse)] =
            std::max(err[idx(Mode::ForwardInverse)],
                     relative_error(finv, Eigen::VectorXd(lu_t->solve(xbar_star))));
      }
      report.starred_dot_identity_error =
          std::max(report.starred_dot_identity_error,
                   dot_error(xbar_star.dot(rinv), finv.dot(ydot_star)));
      const double round_trips = std::max(
          {relative_error(eval(Mode::Forward, rinv), ydot_star),
           relative_error(eval(Mode::ReverseInverse, fwd), xdot),
           relative_error(eval(Mode::Reverse, finv), xbar_star),
           relative_error(eval(Mode::ForwardInverse, rev), ybar)});
      report.composition_error = std::max(report.composition_error, round_trips);
    }
  } catch (const SingularStepError& e) {
    report.singular_step = e.step();
  } catch (const SingularLumpError& e) {
    report.singular_step = 0;
  } catch (const Error& e) {
    report.failure = std::string(e.kind()) + ": " + e.what();
  }
  return report;
}

}  // namespace

ModeReport compare_modes(const Trace& trace, const State& x, std::size_t trials,
                         std::uint64_t seed) {
  bool inverse_shape = true;
  try {
    trace.require_invertible_shape();
  } catch (const ValidationError&) {
    inverse_shape = false;
  }
  Eigen::MatrixXd j;
  try {
    j = dense_jacobian(trace, x);
  } catch (const Error& e) {
    ModeReport report;
    report.trials = trials;
    report.seed = seed;
    report.failure = std::string(e.kind()) + ": " + e.what();
    return report;
  }
  return compare_impl(
      j, [&](Mode m, const State& v) { return evaluate_mode(m, trace, x, v); },
      inverse_shape, trials, seed);
}

ModeReport compare_modes(const Dag& dag, const State& x, std::size_t trials,
                         std::uint64_t seed) {
  ModeReport report;
  report.trials = trials;
  report.seed = seed;
  Eigen::MatrixXd j;
  std::optional<LumpPlan> plan;
  try {
    j = dense_jacobian(dag, x);
    plan.emplace(plan_lumps(dag, greedy_schedule(dag)));
  } catch (const WidthUnderflowError& e) {
    report.singular_step = e.position();
    report.oracle_singular = j.size() > 0 && is_numerically_singular(j);
    return report;
  } catch (const Error& e) {
    report.failure = std::string(e.kind()) + ": " + e.what();
    return report;
  }
  return compare_impl(
      j,
      [&](Mode m, const State& v) { return lumped_mode_eval(dag, *plan, x, v, m); },
      true, trials, seed);
}

}  // namespace invad

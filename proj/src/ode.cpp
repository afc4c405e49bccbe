#include "invad/ode.hpp"

#include <cmath>
#include <string>

namespace invad {

VectorField::VectorField(Trace g) : g_(std::move(g)) {
  if (g_.inputs().size() != g_.width() || g_.outputs().size() != g_.width()) {
    throw ValidationError("a vector field maps the full state to itself");
  }
  for (SlotId s : g_.passive()) {
    if (g_.inputs()[s.index] != s || g_.outputs()[s.index] != s) {
      throw ValidationError("passive slots of a vector field must keep their position");
    }
  }
}

State VectorField::masked(State v) const {
  for (SlotId s : g_.passive()) v[s.index] = 0.0;
  return v;
}

namespace {

// Slot-indexed state from values listed in `slots` order, and back.
State scatter(const State& v, const std::vector<SlotId>& slots) {
  State s(v.size());
  for (std::size_t i = 0; i < slots.size(); ++i) s[slots[i].index] = v[i];
  return s;
}

State gather(const State& s, const std::vector<SlotId>& slots) {
  State v(s.size());
  for (std::size_t i = 0; i < slots.size(); ++i) v[i] = s[slots[i].index];
  return v;
}

}  // namespace

State VectorField::operator()(const State& x) const {
  return masked(gather(run_primal(g_, scatter(x, g_.inputs())), g_.outputs()));
}

State VectorField::jvp(const State& x, const State& v) const {
  const State sx = scatter(x, g_.inputs());
  return masked(gather(invad::jvp(g_, sx, scatter(masked(v), g_.inputs())), g_.outputs()));
}

State VectorField::vjp(const State& x, const State& w) const {
  const State sx = scatter(x, g_.inputs());
  return masked(gather(invad::vjp(g_, sx, scatter(masked(w), g_.outputs())), g_.inputs()));
}

std::size_t OdeProblem::steps() const {
  if (!(t1 > t0) || !(dt > 0.0)) {
    throw ValidationError("ODE problem needs t1 > t0 and dt > 0");
  }
  const double ratio = (t1 - t0) / dt;
  const double nearest = std::round(ratio);
  if (nearest >= 1.0 && std::abs(ratio - nearest) <= 1e-9 * ratio) {
    return static_cast<std::size_t>(nearest);
  }
  return static_cast<std::size_t>(std::ceil(ratio));
}

double OdeProblem::effective_dt() const {
  return (t1 - t0) / static_cast<double>(steps());
}

namespace detail {

State tangent_step(const VectorField& g, const State& x, const State& v, double h) {
  return v + h * g.jvp(x, v);
}

State cotangent_step(const VectorField& g, const State& x, const State& w, double h) {
  return w + h * g.vjp(x, w);
}

}  // namespace detail

namespace {

void check_dimension(const OdeProblem& p, const State& v) {
  const auto n = static_cast<Eigen::Index>(p.field.dimension());
  if (p.x0.size() != n || v.size() != n) {
    throw ValidationError("ODE vectors need " + std::to_string(n) + " entries");
  }
}

// The Euler map f_k(x) = x + dt g(x) as a DAG, for exact inverse steps.
Dag euler_map_dag(const VectorField& field, double dt) {
  const Dag g = dag_from_trace(field.trace());
  const std::size_t n = g.num_inputs();
  std::vector<DagNode> nodes = g.nodes();
  std::vector<ValueId> outputs;
  const BasisOp& scale = builtin_ops().at("mul_const");
  const BasisOp& add = builtin_ops().at("add");
  for (std::size_t i = 0; i < n; ++i) {
    nodes.push_back(DagNode{&scale, {g.outputs()[i]}, dt});
    const ValueId scaled = n + nodes.size() - 1;
    nodes.push_back(DagNode{&add, {i, scaled}, 0.0});
    outputs.push_back(n + nodes.size() - 1);
  }
  return Dag(n, std::move(nodes), std::move(outputs));
}

}  // namespace

std::vector<State> integrate_primal(const OdeProblem& p) {
  check_dimension(p, p.x0);
  const std::size_t k = p.steps();
  const double dt = p.effective_dt();
  std::vector<State> traj;
  traj.reserve(k + 1);
  traj.push_back(p.x0);
  for (std::size_t i = 0; i < k; ++i) {
    const State& x = traj.back();
    traj.push_back(x + dt * p.field(x));
  }
  return traj;
}

State ode_forward_tangent(const OdeProblem& p, const State& xdot0) {
  check_dimension(p, xdot0);
  const std::size_t k = p.steps();
  const double dt = p.effective_dt();
  State x = p.x0;
  State v = xdot0;
  for (std::size_t i = 0; i < k; ++i) {
    v = detail::tangent_step(p.field, x, v, dt);
    x = x + dt * p.field(x);
  }
  return v;
}

State ode_reverse_cotangent(const OdeProblem& p, const State& xbar1) {
  check_dimension(p, xbar1);
  const auto traj = integrate_primal(p);
  const double dt = p.effective_dt();
  State w = xbar1;
  for (std::size_t i = traj.size() - 1; i-- > 0;) {
    w = detail::cotangent_step(p.field, traj[i], w, dt);
  }
  return w;
}

State ode_reverse_inverse(const OdeProblem& p, const State& ydot_star1,
                          InverseStep step) {
  check_dimension(p, ydot_star1);
  const auto traj = integrate_primal(p);
  const double dt = p.effective_dt();
  State v = ydot_star1;
  if (step == InverseStep::FirstOrder) {
    for (std::size_t i = traj.size() - 1; i-- > 0;) {
      v = detail::tangent_step(p.field, traj[i], v, -dt);
    }
    return v;
  }
  const Dag f = euler_map_dag(p.field, dt);
  const LumpPlan plan = plan_lumps(f, greedy_schedule(f));
  for (std::size_t i = traj.size() - 1; i-- > 0;) {
    v = lumped_mode_eval(f, plan, traj[i], v, Mode::ReverseInverse);
  }
  return v;
}

State ode_forward_inverse(const OdeProblem& p, const State& xbar_star0,
                          InverseStep step) {
  check_dimension(p, xbar_star0);
  const std::size_t k = p.steps();
  const double dt = p.effective_dt();
  State x = p.x0;
  State w = xbar_star0;
  std::optional<Dag> f;
  std::optional<LumpPlan> plan;
  if (step == InverseStep::ExactSolve) {
    f.emplace(euler_map_dag(p.field, dt));
    plan.emplace(plan_lumps(*f, greedy_schedule(*f)));
  }
  for (std::size_t i = 0; i < k; ++i) {
    w = step == InverseStep::FirstOrder
            ? detail::cotangent_step(p.field, x, w, -dt)
            : lumped_mode_eval(*f, *plan, x, w, Mode::ForwardInverse);
    x = x + dt * p.field(x);
  }
  return w;
}

const char* ode_mode_name(OdeMode mode) noexcept {
  switch (mode) {
    case OdeMode::Primal: return "primal";
    case OdeMode::Tangent: return "jvp";
    case OdeMode::Cotangent: return "vjp";
    case OdeMode::ReverseInverse: return "jvp-inv";
    case OdeMode::ForwardInverse: return "vjp-inv";
  }
  return "?";
}

State run_ode_mode(const OdeProblem& p, OdeMode mode, const State& v,
                   InverseStep step) {
  switch (mode) {
    case OdeMode::Primal: return integrate_primal(p).back();
    case OdeMode::Tangent: return ode_forward_tangent(p, v);
    case OdeMode::Cotangent: return ode_reverse_cotangent(p, v);
    case OdeMode::ReverseInverse: return ode_reverse_inverse(p, v, step);
    case OdeMode::ForwardInverse: return ode_forward_inverse(p, v, step);
  }
  throw ValidationError("unknown ODE mode");
}

std::vector<ConvergenceRow> convergence_report(const OdeProblem& p, OdeMode mode,
                                               std::span<const double> dts,
                                               const State& v,
                                               const std::optional<State>& reference) {
  if (dts.empty()) return {};
  for (std::size_t i = 1; i < dts.size(); ++i) {
    if (!(dts[i] < dts[i - 1])) throw ValidationError("dts must be strictly decreasing");
  }
  const auto run = [&](double dt) {
    OdeProblem q = p;
    q.dt = dt;
    return run_ode_mode(q, mode, v);
  };
  // Without a reference, each run is compared with a run at half its step.
  const auto error = [&](double dt) {
    const State ref = reference ? *reference : run(dt / 2.0);
    return (run(dt) - ref).cwiseAbs().maxCoeff();
  };

  std::vector<ConvergenceRow> rows;
  for (std::size_t i = 0; i < dts.size(); ++i) {
    ConvergenceRow row{dts[i], error(dts[i]), std::nullopt};
    if (i > 0 && rows.back().error > 0.0 && row.error > 0.0) {
      row.order = std::log(rows.back().error / row.error) / std::log(dts[i - 1] / dts[i]);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace invad

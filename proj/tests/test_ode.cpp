#include <gtest/gtest.h>

#include <cmath>

#include "invad/errors.hpp"
#include "invad/ode.hpp"
#include "support/generators.hpp"

namespace invad {
namespace {

Instruction ins(std::string_view op, int dest, std::vector<int> srcs, double literal = 0.0) {
  std::vector<SlotId> s;
  for (int i : srcs) s.emplace_back(i);
  return make_instruction(op, SlotId(dest), std::move(s), literal);
}

VectorField zero_field() { return VectorField(Trace::square(1, {ins("mul_const", 0, {0}, 0.0)})); }
VectorField decay() { return VectorField(Trace::square(1, {ins("neg", 0, {0})})); }

// g(x) = (-x1, x0)
VectorField rotation() {
  return VectorField(Trace(2, {ins("neg", 1, {1})}, {SlotId(0), SlotId(1)},
                           {SlotId(1), SlotId(0)}));
}

// g(x) = (sin(x1), x0 * x1)
VectorField nonlinear() {
  return VectorField(Trace(2, {ins("mul", 1, {1, 0}), ins("sin", 0, {0})},
                           {SlotId(1), SlotId(0)}, {SlotId(0), SlotId(1)}));
}

OdeProblem problem(VectorField g, State x0, double dt) {
  return OdeProblem{std::move(g), 0.0, 1.0, dt, std::move(x0)};
}

const State one{{1.0}};

TEST(VectorField, SlotListsDefineComponentOrder) {
  const State x{{2.0, 3.0}};
  EXPECT_EQ(rotation()(x), (State{{-3.0, 2.0}}));
  EXPECT_EQ(rotation().jvp(x, State{{1.0, 0.0}}), (State{{0.0, 1.0}}));
  EXPECT_EQ(rotation().vjp(x, State{{1.0, 0.0}}), (State{{0.0, -1.0}}));
  const State g = nonlinear()(x);
  EXPECT_DOUBLE_EQ(g[0], std::sin(3.0));
  EXPECT_DOUBLE_EQ(g[1], 6.0);
}

TEST(VectorField, RejectsNonSquareTraces) {
  EXPECT_THROW(VectorField(Trace(2, {ins("mul", 0, {0, 1})}, {SlotId(0), SlotId(1)}, {SlotId(0)})),
               ValidationError);
}

TEST(Primal, ZeroFieldIsConstant) {
  const auto traj = integrate_primal(problem(zero_field(), State{{7.0}}, 0.1));
  ASSERT_EQ(traj.size(), 11u);
  for (const State& x : traj) EXPECT_EQ(x[0], 7.0);
}

TEST(Primal, DecayApproachesInverseE) {
  const State x = integrate_primal(problem(decay(), one, 1e-4)).back();
  EXPECT_LE(std::abs(x[0] - std::exp(-1.0)) / std::exp(-1.0), 1e-4);
}

TEST(Primal, ErrorHalvesWithStep) {
  const double e1 = std::abs(integrate_primal(problem(decay(), one, 1e-2)).back()[0] - std::exp(-1.0));
  const double e2 = std::abs(integrate_primal(problem(decay(), one, 5e-3)).back()[0] - std::exp(-1.0));
  EXPECT_NEAR(e1 / e2, 2.0, 0.1);
}

TEST(Steps, RoundsNearIntegerRatios) {
  EXPECT_EQ(problem(decay(), one, 0.1).steps(), 10u);
  EXPECT_EQ(problem(decay(), one, 1e-4).steps(), 10000u);
  EXPECT_EQ(problem(decay(), one, 0.3).steps(), 4u);
  EXPECT_DOUBLE_EQ(problem(decay(), one, 0.3).effective_dt(), 0.25);
  EXPECT_THROW(problem(decay(), one, 0.0).steps(), ValidationError);
}

TEST(Tangent, Examples) {
  EXPECT_EQ(ode_forward_tangent(problem(zero_field(), State{{2.0}}, 0.1), State{{3.0}})[0], 3.0);
  EXPECT_NEAR(ode_forward_tangent(problem(decay(), one, 1e-4), one)[0], std::exp(-1.0), 1e-4);
}

TEST(Tangent, RotationPreservesNormToFirstOrder) {
  for (double dt : {1e-3, 5e-4}) {
    const State v = ode_forward_tangent(problem(rotation(), State{{1.0, 0.0}}, dt),
                                        State{{0.6, 0.8}});
    EXPECT_LE(std::abs(v.norm() - 1.0), 2.0 * dt);
  }
}

TEST(Cotangent, Examples) {
  EXPECT_EQ(ode_reverse_cotangent(problem(zero_field(), State{{2.0}}, 0.1), State{{3.0}})[0], 3.0);
  EXPECT_NEAR(ode_reverse_cotangent(problem(decay(), one, 1e-4), one)[0], std::exp(-1.0), 1e-4);
}

TEST(Cotangent, DiscreteDotProductIdentity) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const OdeProblem p = problem(nonlinear(), testing::uniform_vector(rng, 2, -1.0, 1.0), 0.01);
    const State xdot = testing::normal_vector(rng, 2);
    const State xbar = testing::normal_vector(rng, 2);
    const double lhs = ode_reverse_cotangent(p, xbar).dot(xdot);
    const double rhs = xbar.dot(ode_forward_tangent(p, xdot));
    EXPECT_LE(std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)), 1e-12);
  }
}

TEST(ReverseInverse, Examples) {
  EXPECT_EQ(ode_reverse_inverse(problem(zero_field(), State{{2.0}}, 0.1), State{{3.0}})[0], 3.0);
  const double dt = 1e-4;
  EXPECT_NEAR(ode_reverse_inverse(problem(decay(), one, dt), one)[0], std::exp(1.0), 10 * dt);
}

TEST(ReverseInverse, UndoesTangentToFirstOrder) {
  const State v{{0.3, -0.7}};
  std::vector<double> errors;
  for (double dt : {1e-2, 5e-3}) {
    const OdeProblem p = problem(nonlinear(), State{{0.5, 0.2}}, dt);
    errors.push_back((ode_reverse_inverse(p, ode_forward_tangent(p, v)) - v).cwiseAbs().maxCoeff());
    EXPECT_LE(errors.back(), 10 * dt);
  }
  // The round-trip error constant is stable under halving.
  EXPECT_NEAR(errors[0] / errors[1], 2.0, 0.5);
}

TEST(ForwardInverse, Examples) {
  EXPECT_EQ(ode_forward_inverse(problem(zero_field(), State{{2.0}}, 0.1), State{{3.0}})[0], 3.0);
  const double dt = 1e-4;
  EXPECT_NEAR(ode_forward_inverse(problem(decay(), one, dt), one)[0], std::exp(1.0), 10 * dt);
}

TEST(ForwardInverse, UndoesCotangentToFirstOrder) {
  const State w{{0.3, -0.7}};
  for (double dt : {1e-2, 5e-3}) {
    const OdeProblem p = problem(nonlinear(), State{{0.5, 0.2}}, dt);
    EXPECT_LE((ode_reverse_cotangent(p, ode_forward_inverse(p, w)) - w).cwiseAbs().maxCoeff(),
              10 * dt);
  }
}

TEST(ExactSolve, InvertsTheDiscreteMapsExactly) {
  const State v{{0.3, -0.7}};
  const OdeProblem p = problem(nonlinear(), State{{0.5, 0.2}}, 0.05);
  const State back = ode_reverse_inverse(p, ode_forward_tangent(p, v), InverseStep::ExactSolve);
  EXPECT_LE((back - v).cwiseAbs().maxCoeff(), 1e-12);
  const State fwd = ode_reverse_cotangent(p, ode_forward_inverse(p, v, InverseStep::ExactSolve));
  EXPECT_LE((fwd - v).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ExactSolve, DecayGivesReciprocalPowers) {
  const double dt = 0.01;
  const State r = ode_forward_inverse(problem(decay(), one, dt), one, InverseStep::ExactSolve);
  EXPECT_NEAR(r[0], std::pow(1.0 - dt, -100.0), 1e-10);
}

TEST(Convergence, DecayPrimalAndForwardInverseAreFirstOrder) {
  const std::vector<double> dts{1e-2, 5e-3, 2.5e-3};
  const OdeProblem p = problem(decay(), one, dts[0]);
  for (auto [mode, ref] : {std::pair{OdeMode::Primal, std::exp(-1.0)},
                           std::pair{OdeMode::ForwardInverse, std::exp(1.0)}}) {
    const auto rows = convergence_report(p, mode, dts, one, State{{ref}});
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_FALSE(rows[0].order.has_value());
    for (std::size_t i = 1; i < rows.size(); ++i) {
      ASSERT_TRUE(rows[i].order.has_value());
      EXPECT_GE(*rows[i].order, 0.8);
      EXPECT_LE(*rows[i].order, 1.2);
    }
  }
}

TEST(Convergence, WithoutReferenceUsesHalfSteps) {
  const std::vector<double> dts{1e-2, 5e-3, 2.5e-3};
  const auto rows = convergence_report(problem(decay(), one, 1e-2), OdeMode::Primal, dts, one);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_NEAR(*rows[i].order, 1.0, 0.2);
}

TEST(Convergence, ZeroFieldIsDegenerate) {
  const std::vector<double> dts{1e-2, 5e-3};
  const auto rows =
      convergence_report(problem(zero_field(), one, 1e-2), OdeMode::ForwardInverse, dts, one, one);
  for (const auto& row : rows) {
    EXPECT_EQ(row.error, 0.0);
    EXPECT_FALSE(row.order.has_value());
  }
}

TEST(SideParameters, PassiveSlotsStayFixed) {
  // dx/dt = -k x with k held in a passive slot.
  const VectorField g(Trace::square(2, {ins("mul", 0, {0, 1}), ins("neg", 0, {0})}, {SlotId(1)}));
  const OdeProblem p{g, 0.0, 1.0, 1e-3, State{{1.0, 2.0}}};
  const State x = integrate_primal(p).back();
  EXPECT_EQ(x[1], 2.0);
  EXPECT_NEAR(x[0], std::exp(-2.0), 1e-2);
  const State v = ode_forward_inverse(p, State{{1.0, 1.0}});
  EXPECT_EQ(v[1], 1.0);
  EXPECT_NEAR(v[0], std::exp(2.0), 0.05);
  EXPECT_THROW(ode_forward_inverse(p, State{{1.0, 1.0}}, InverseStep::ExactSolve),
               ValidationError);
}

}  // namespace
}  // namespace invad

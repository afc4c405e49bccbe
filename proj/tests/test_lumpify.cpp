#include <gtest/gtest.h>

#include "invad/errors.hpp"
#include "invad/lumpify.hpp"
#include "invad/oracle.hpp"
#include "support/generators.hpp"

namespace invad {
namespace {

const BasisOp* op(std::string_view name) { return &builtin_ops().at(name); }

Dag chain(std::size_t length) {
  std::vector<DagNode> nodes;
  for (std::size_t i = 0; i < length; ++i) nodes.push_back({op(i % 2 ? "sin" : "exp"), {i}});
  return Dag(1, std::move(nodes), {length});
}

Dag diamond() {
  return Dag(1, {{op("exp"), {0}}, {op("sin"), {0}}, {op("add"), {1, 2}}}, {3});
}

Dag two_diamonds() {
  return Dag(2,
             {{op("exp"), {0}}, {op("sin"), {0}}, {op("add"), {2, 3}},
              {op("exp"), {1}}, {op("sin"), {1}}, {op("add"), {5, 6}}},
             {4, 7});
}

TEST(Greedy, ChainCutsEveryStep) {
  const Dag d = chain(5);
  const LumpSchedule s = greedy_schedule(d);
  EXPECT_EQ(s.cuts, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));
  ASSERT_EQ(s.lumps.size(), 5u);
  for (const Lump& l : s.lumps) EXPECT_EQ(l.size(), 1u);
  EXPECT_TRUE(is_valid_schedule(d, s));
}

TEST(Greedy, DiamondIsOneLump) {
  const LumpSchedule s = greedy_schedule(diamond());
  ASSERT_EQ(s.lumps.size(), 1u);
  EXPECT_EQ(s.lumps[0].size(), 3u);
  EXPECT_EQ(s.lumps[0].peak_width, 2u);
}

TEST(Greedy, DroppedValueUnderflows) {
  const Dag d(2, {{op("mul"), {0, 1}}, {op("exp"), {2}}, {op("sin"), {2}}}, {3, 4});
  EXPECT_THROW(greedy_schedule(d), WidthUnderflowError);
  EXPECT_THROW(brute_force_schedule(d, LumpObjective::Size), WidthUnderflowError);
}

TEST(BruteForce, ChainAndDiamond) {
  EXPECT_EQ(brute_force_schedule(chain(4), LumpObjective::Size).lumps.size(), 4u);
  const LumpSchedule s = brute_force_schedule(diamond(), LumpObjective::Width);
  ASSERT_EQ(s.lumps.size(), 1u);
  EXPECT_EQ(s.lumps[0].peak_width, 2u);
}

TEST(BruteForce, TwoDiamondsInterleaving) {
  const Dag d = two_diamonds();
  const LumpSchedule best = brute_force_schedule(d, LumpObjective::Size);
  EXPECT_EQ(schedule_cost(best, LumpObjective::Size).primary, 3u);
  EXPECT_TRUE(is_valid_schedule(d, best));
  const LumpSchedule worst = make_schedule(d, {0, 3, 1, 4, 2, 5});
  ASSERT_EQ(worst.lumps.size(), 1u);
  EXPECT_EQ(worst.lumps[0].size(), 6u);
  EXPECT_EQ(schedule_cost(greedy_schedule(d), LumpObjective::Size).primary, 3u);
}

TEST(BruteForce, SizeLimit) {
  EXPECT_THROW(brute_force_schedule(chain(13), LumpObjective::Size), SizeLimitError);
  EXPECT_NO_THROW(brute_force_schedule(chain(12), LumpObjective::Size));
}

TEST(MakeSchedule, RejectsNonTopologicalOrders) {
  EXPECT_THROW(make_schedule(diamond(), {2, 0, 1}), ValidationError);
  EXPECT_THROW(make_schedule(diamond(), {0, 1}), ValidationError);
  EXPECT_THROW(make_schedule(diamond(), {0, 0, 1}), ValidationError);
}

TEST(LumpBlocks, SingleMultiply) {
  const Dag d(2, {{op("mul"), {0, 1}}}, {2, 1});
  const LumpPlan plan = plan_lumps(d, greedy_schedule(d));
  const auto values = evaluate_values(d, State{{3.0, 2.0}});
  const LumpLinearization lin = lump_linearization(d, plan, 0, values);
  EXPECT_EQ(lin.blocks.a, (Eigen::MatrixXd{{2.0}}));
  EXPECT_EQ(lin.blocks.b, (Eigen::MatrixXd{{3.0}}));
  EXPECT_EQ(plan.schedule.lumps[0].l, 1u);
  EXPECT_EQ(plan.schedule.lumps[0].k, 2u);
}

TEST(LumpBlocks, SquareLump) {
  const Dag d(1, {{op("square"), {0}}}, {1});
  const LumpPlan plan = plan_lumps(d, greedy_schedule(d));
  const LumpLinearization lin = lump_linearization(d, plan, 0, evaluate_values(d, State{{3.0}}));
  EXPECT_EQ(lin.blocks.a, (Eigen::MatrixXd{{6.0}}));
  EXPECT_EQ(lin.blocks.b.cols(), 0);
}

TEST(InvertLump, Scalar) {
  const auto inv = invert_lump(BlockJacobian<double>{Eigen::MatrixXd{{2.0}}, Eigen::MatrixXd{{3.0}}});
  EXPECT_EQ(inv.a_inv, (Eigen::MatrixXd{{0.5}}));
  EXPECT_EQ(inv.neg_a_inv_b, (Eigen::MatrixXd{{-1.5}}));
}

TEST(InvertLump, Identity) {
  const auto inv = invert_lump(
      BlockJacobian<double>{Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(2, 1)});
  EXPECT_EQ(inv.a_inv, Eigen::MatrixXd::Identity(2, 2));
  EXPECT_EQ(inv.neg_a_inv_b, Eigen::MatrixXd::Zero(2, 1));
}

TEST(InvertLump, UpperTriangular) {
  const BlockJacobian<double> j{Eigen::MatrixXd{{1.0, 1.0}, {0.0, 2.0}},
                                Eigen::MatrixXd{{1.0}, {1.0}}};
  const auto inv = invert_lump(j);
  EXPECT_EQ(inv.a_inv, (Eigen::MatrixXd{{1.0, -0.5}, {0.0, 0.5}}));
  EXPECT_EQ(inv.neg_a_inv_b, (Eigen::MatrixXd{{-0.5}, {-0.5}}));
  EXPECT_EQ(assemble(inv) * assemble(j), Eigen::MatrixXd::Identity(3, 3));
}

TEST(InvertLump, SingularThrows) {
  const BlockJacobian<double> j{Eigen::MatrixXd{{1.0, 2.0}, {2.0, 4.0}}, Eigen::MatrixXd(2, 0)};
  EXPECT_THROW(invert_lump(j), SingularLumpError);
}

TEST(InvertLump, WorksForLongDouble) {
  const BlockJacobian<long double> j{MatrixX<long double>{{4.0L}}, MatrixX<long double>{{2.0L}}};
  const auto inv = invert_lump(j);
  EXPECT_EQ(inv.a_inv(0, 0), 0.25L);
  EXPECT_EQ(inv.neg_a_inv_b(0, 0), -0.5L);
}

TEST(LumpedModes, TraceEquivalentDagMatchesModes) {
  const Trace t = Trace::square(2, {make_instruction("mul", SlotId(0), {SlotId(0), SlotId(1)}),
                                    make_instruction("exp", SlotId(1), {SlotId(1)})});
  const Dag d = dag_from_trace(t);
  const State x{{3.0, 2.0}}, v{{0.4, -1.1}};
  for (Mode m : {Mode::Forward, Mode::Reverse, Mode::ForwardInverse, Mode::ReverseInverse}) {
    EXPECT_LE(relative_error(lumped_mode_eval(d, x, v, m), evaluate_mode(m, t, x, v)), 1e-15)
        << mode_name(m);
  }
}

TEST(LumpedModes, DiamondWithKnownDerivative) {
  // d/dx (2x + 3x) = 5
  const Dag d(1, {{op("mul_const"), {0}, 2.0}, {op("mul_const"), {0}, 3.0}, {op("add"), {1, 2}}},
              {3});
  const State r = lumped_mode_eval(d, State{{0.7}}, State{{1.0}}, Mode::ReverseInverse);
  EXPECT_DOUBLE_EQ(r[0], 0.2);
}

TEST(LumpedModes, TwoDiamondsMatchOracle) {
  const Dag d = two_diamonds();
  const State x{{0.3, 1.2}}, v{{1.0, -2.0}};
  const Eigen::MatrixXd j = dense_jacobian(d, x);
  EXPECT_LE(relative_error(lumped_mode_eval(d, x, v, Mode::ReverseInverse), dense_solve(j, v)),
            1e-8);
  EXPECT_LE(relative_error(lumped_mode_eval(d, x, v, Mode::ForwardInverse),
                           dense_solve(j.transpose(), v)),
            1e-8);
}

TEST(LumpedModes, LoweredTraceAgreesWithDag) {
  const Dag d = two_diamonds();
  const Trace t = lower_to_trace(d, greedy_schedule(d));
  const State x{{0.3, 1.2}};
  State full = State::Zero(static_cast<Eigen::Index>(t.width()));
  for (std::size_t i = 0; i < t.inputs().size(); ++i) full[t.inputs()[i].index] = x[i];
  const State y = run_primal(t, full);
  const State expected = evaluate_dag(d, x);
  for (std::size_t i = 0; i < t.outputs().size(); ++i) {
    EXPECT_EQ(y[t.outputs()[i].index], expected[i]);
  }
}

TEST(GeneratedSuite, GreedyValidAndModesMatch) {
  const auto suite = testing::dag_suite(3, 60);
  for (const auto& c : suite) {
    const LumpSchedule s = greedy_schedule(c.dag);
    EXPECT_TRUE(is_valid_schedule(c.dag, s));
    const ModeReport r = compare_modes(c.dag, c.x, 3, 9);
    EXPECT_TRUE(r.passed()) << r.failure.value_or("");
  }
}

}  // namespace
}  // namespace invad

#include <gtest/gtest.h>

#include "invad/errors.hpp"
#include "invad/oracle.hpp"
#include "support/generators.hpp"

namespace invad {
namespace {

Instruction ins(std::string_view op, int dest, std::vector<int> srcs, double literal = 0.0) {
  std::vector<SlotId> s;
  for (int i : srcs) s.emplace_back(i);
  return make_instruction(op, SlotId(dest), std::move(s), literal);
}

TEST(DenseJacobian, Examples) {
  EXPECT_EQ(dense_jacobian(Trace::square(2, {}), State{{3.0, 2.0}}),
            Eigen::MatrixXd::Identity(2, 2));
  EXPECT_EQ(dense_jacobian(Trace::square(2, {ins("mul", 0, {0, 1})}), State{{3.0, 2.0}}),
            (Eigen::MatrixXd{{2.0, 3.0}, {0.0, 1.0}}));
  EXPECT_EQ(dense_jacobian(Trace::square(1, {ins("square", 0, {0})}), State{{1.5}}),
            (Eigen::MatrixXd{{3.0}}));
}

TEST(DenseJacobian, AgreesWithFiniteDifferences) {
  for (const auto& c : testing::trace_corpus(17, 100)) {
    const Eigen::MatrixXd j = dense_jacobian(c.trace, c.x);
    const Eigen::MatrixXd fd = finite_difference_jacobian(c.trace, c.x);
    const double scale = std::max(1.0, j.cwiseAbs().maxCoeff());
    EXPECT_LE((j - fd).cwiseAbs().maxCoeff() / scale, 1e-5);
  }
}

TEST(DenseJacobian, DagAgreesWithFiniteDifferences) {
  for (const auto& c : testing::dag_suite(23, 50)) {
    const Eigen::MatrixXd j = dense_jacobian(c.dag, c.x);
    const Eigen::MatrixXd fd = finite_difference_jacobian(c.dag, c.x);
    const double scale = std::max(1.0, j.cwiseAbs().maxCoeff());
    EXPECT_LE((j - fd).cwiseAbs().maxCoeff() / scale, 1e-5);
  }
}

TEST(DenseSolve, Examples) {
  EXPECT_EQ(dense_solve(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd{{4.0, 5.0}}),
            (Eigen::VectorXd{{4.0, 5.0}}));
  EXPECT_EQ(dense_solve(Eigen::MatrixXd{{2.0, 3.0}, {0.0, 1.0}}, Eigen::VectorXd{{1.0, 0.0}}),
            (Eigen::VectorXd{{0.5, 0.0}}));
  EXPECT_THROW(dense_solve(Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd{{1.0, 0.0}}),
               SingularMatrixError);
  EXPECT_TRUE(is_numerically_singular(Eigen::MatrixXd::Zero(2, 2)));
}

TEST(DenseInverse, RandomWellConditioned) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 8;
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = testing::normal_vector(rng, 1)[0];
    m += 3.0 * Eigen::MatrixXd::Identity(n, n) * std::sqrt(double(n));
    const Eigen::MatrixXd inv = dense_inverse(m);
    EXPECT_LE((inv * m - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-9);
    const Eigen::VectorXd v = testing::normal_vector(rng, n);
    EXPECT_LE((m * dense_solve(m, v) - v).cwiseAbs().maxCoeff(), 1e-10 * v.cwiseAbs().maxCoeff());
  }
}

TEST(CompareModes, EmptyTrace) {
  const ModeReport r = compare_modes(Trace::square(3, {}), State{{1.0, 2.0, 3.0}}, 10, 42);
  EXPECT_TRUE(r.passed());
  EXPECT_TRUE(r.inverse_checked);
  for (double e : r.max_error) EXPECT_EQ(e, 0.0);
  EXPECT_EQ(r.composition_error, 0.0);
}

TEST(CompareModes, SingularStepConsistentWithOracle) {
  const Trace t = Trace::square(2, {ins("mul", 0, {0, 1})});
  const ModeReport r = compare_modes(t, State{{3.0, 0.0}}, 10, 42);
  ASSERT_TRUE(r.singular_step.has_value());
  EXPECT_EQ(*r.singular_step, 0u);
  EXPECT_TRUE(r.oracle_singular);
  EXPECT_TRUE(r.passed());
}

TEST(CompareModes, DeterministicForSeed) {
  const auto corpus = testing::trace_corpus(8, 5);
  for (const auto& c : corpus) {
    const ModeReport a = compare_modes(c.trace, c.x, 20, 42);
    const ModeReport b = compare_modes(c.trace, c.x, 20, 42);
    EXPECT_EQ(a.max_error, b.max_error);
    EXPECT_EQ(a.dot_identity_error, b.dot_identity_error);
  }
}

TEST(CompareModes, NonSquareTraceSkipsInverseModes) {
  const Trace t(2, {ins("mul", 0, {0, 1})}, {SlotId(0), SlotId(1)}, {SlotId(0)});
  const ModeReport r = compare_modes(t, State{{3.0, 2.0}}, 10, 42);
  EXPECT_FALSE(r.inverse_checked);
  EXPECT_TRUE(r.passed());
}

TEST(RelativeError, ScalesByExpectedMagnitude) {
  EXPECT_DOUBLE_EQ(relative_error(Eigen::VectorXd{{0.5}}, Eigen::VectorXd{{0.25}}), 0.25);
  EXPECT_DOUBLE_EQ(relative_error(Eigen::VectorXd{{110.0}}, Eigen::VectorXd{{100.0}}), 0.1);
}

}  // namespace
}  // namespace invad

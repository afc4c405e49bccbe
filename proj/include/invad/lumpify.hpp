#pragma once

#include <compare>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "invad/dag.hpp"
#include "invad/modes.hpp"

namespace invad {

/// A contiguous run of scheduled nodes between two cuts.
struct Lump {
  std::size_t begin = 0;  // position in LumpSchedule::order
  std::size_t end = 0;
  std::size_t peak_width = 0;  // max live width over the lump's cuts
  std::size_t l = 0;           // values produced that survive the lump
  std::size_t k = 0;           // live values the lump reads

  std::size_t size() const noexcept { return end - begin; }
};

struct LumpSchedule {
  std::vector<std::size_t> order;  // node indices, topologically sorted
  std::vector<std::size_t> cuts;   // positions where live width equals n
  std::vector<Lump> lumps;
};

enum class LumpObjective { Size, Width, LK };

const char* objective_name(LumpObjective objective) noexcept;

/// Lexicographic cost of a schedule under an objective: max lump size, max
/// lump width, or (max l, max k).
struct ScheduleCost {
  std::size_t primary = 0;
  std::size_t secondary = 0;
  friend auto operator<=>(const ScheduleCost&, const ScheduleCost&) = default;
};

ScheduleCost schedule_cost(const LumpSchedule& s, LumpObjective objective);

/// Cuts a node order into lumps. Throws WidthUnderflowError if live width
/// ever falls below n and ValidationError if `order` is not a topological
/// order of every node.
LumpSchedule make_schedule(const Dag& dag, std::vector<std::size_t> order);

/// Repeatedly schedules a ready node, preferring one that shrinks the live
/// width, then one that keeps it, then the smallest growth; ties go to the
/// lowest node index.
LumpSchedule greedy_schedule(const Dag& dag);

inline constexpr std::size_t kBruteForceNodeLimit = 12;

/// Exhaustive search over topological orders for one minimizing the
/// objective. Among equal costs the lexicographically first order wins.
LumpSchedule brute_force_schedule(const Dag& dag, LumpObjective objective,
                                  std::size_t node_limit = kBruteForceNodeLimit);

/// Independent structural check: order is a topological permutation, cuts
/// sit exactly where the live width is n, lumps tile the order.
bool is_valid_schedule(const Dag& dag, const LumpSchedule& schedule);

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Nontrivial blocks of a lump Jacobian [[A, B], [0, I]] with the produced
/// values ordered first.
template <typename Scalar>
struct BlockJacobian {
  MatrixX<Scalar> a;  // l x l
  MatrixX<Scalar> b;  // l x (k - l)
};

template <typename Scalar>
struct InverseBlockJacobian {
  MatrixX<Scalar> a_inv;        // A^-1
  MatrixX<Scalar> neg_a_inv_b;  // -A^-1 B
};

/// Which values a lump consumes, keeps and produces, and where they live in
/// the n-slot derivative vector. produced[i] takes over killed[i]'s slot.
struct LumpPorts {
  std::vector<ValueId> killed;
  std::vector<ValueId> kept;
  std::vector<ValueId> produced;
  std::vector<SlotId> killed_slots;
  std::vector<SlotId> kept_slots;
};

struct LumpPlan {
  LumpSchedule schedule;
  std::vector<LumpPorts> ports;
  std::vector<SlotId> output_slots;  // final slot of each DAG output
};

LumpPlan plan_lumps(const Dag& dag, LumpSchedule schedule);

struct LumpLinearization {
  BlockJacobian<double> blocks;
  LumpPorts ports;
};

/// Block Jacobian of lump `index`, by forward accumulation of unit tangents
/// over the lump's nodes. `values` are primal values indexed by ValueId.
LumpLinearization lump_linearization(const Dag& dag, const LumpPlan& plan,
                                     std::size_t index,
                                     std::span<const double> values);

namespace detail {

/// Solves A X = R by Gaussian elimination with partial pivoting.
template <typename Scalar>
MatrixX<Scalar> pivoted_solve(MatrixX<Scalar> a, MatrixX<Scalar> rhs,
                              Scalar rel_tol) {
  using std::abs;
  const Eigen::Index n = a.rows();
  if (a.cols() != n || rhs.rows() != n) {
    throw ValidationError("pivoted_solve: dimension mismatch");
  }
  Scalar norm = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    norm = std::max<Scalar>(norm, a.row(i).cwiseAbs().sum());
  }
  const Scalar tol = rel_tol * norm;
  for (Eigen::Index col = 0; col < n; ++col) {
    Eigen::Index pivot = col;
    for (Eigen::Index r = col + 1; r < n; ++r) {
      if (abs(a(r, col)) > abs(a(pivot, col))) pivot = r;
    }
    if (!(abs(a(pivot, col)) > tol)) {
      throw SingularLumpError("lump block A is singular (pivot " +
                              detail::format_real(double(abs(a(pivot, col)))) +
                              " in column " + std::to_string(col) + ")");
    }
    if (pivot != col) {
      a.row(col).swap(a.row(pivot));
      rhs.row(col).swap(rhs.row(pivot));
    }
    for (Eigen::Index r = col + 1; r < n; ++r) {
      const Scalar factor = a(r, col) / a(col, col);
      if (factor == Scalar(0)) continue;
      a.row(r).tail(n - col) -= factor * a.row(col).tail(n - col);
      rhs.row(r) -= factor * rhs.row(col);
    }
  }
  for (Eigen::Index col = n; col-- > 0;) {
    rhs.row(col) /= a(col, col);
    for (Eigen::Index r = 0; r < col; ++r) {
      rhs.row(r) -= a(r, col) * rhs.row(col);
    }
  }
  return rhs;
}

}  // namespace detail

inline constexpr double kLumpPivotTol = 1e-12;

/// A^-1 and -A^-1 B from one pivoted elimination on [A | I B].
template <typename Scalar>
InverseBlockJacobian<Scalar> invert_lump(const BlockJacobian<Scalar>& j,
                                         Scalar rel_tol = Scalar(kLumpPivotTol)) {
  const Eigen::Index l = j.a.rows();
  if (j.a.cols() != l || j.b.rows() != l) {
    throw ValidationError("lump blocks have inconsistent shapes");
  }
  MatrixX<Scalar> rhs(l, l + j.b.cols());
  rhs << MatrixX<Scalar>::Identity(l, l), j.b;
  const MatrixX<Scalar> solved = detail::pivoted_solve<Scalar>(j.a, rhs, rel_tol);
  return {solved.leftCols(l), -solved.rightCols(j.b.cols())};
}

inline InverseBlockJacobian<double> invert_lump(const LumpLinearization& lin) {
  return invert_lump(lin.blocks);
}

/// Assembles the full (k x k) lump Jacobian [[A, B], [0, I]].
template <typename Scalar>
MatrixX<Scalar> assemble(const BlockJacobian<Scalar>& j) {
  const Eigen::Index l = j.a.rows(), k = l + j.b.cols();
  MatrixX<Scalar> m = MatrixX<Scalar>::Identity(k, k);
  m.topLeftCorner(l, l) = j.a;
  m.topRightCorner(l, k - l) = j.b;
  return m;
}

template <typename Scalar>
MatrixX<Scalar> assemble(const InverseBlockJacobian<Scalar>& j) {
  return assemble(BlockJacobian<Scalar>{j.a_inv, j.neg_a_inv_b});
}

/// Any of the four modes over a DAG, treating each lump as one macro step.
/// Forward-direction modes take and return vectors indexed by (input,
/// output) position; reverse-direction modes by (output, input).
State lumped_mode_eval(const Dag& dag, const LumpPlan& plan, const State& x,
                       const State& v, Mode mode, const ModeOptions& opts = {});

/// Schedules greedily, then evaluates.
State lumped_mode_eval(const Dag& dag, const State& x, const State& v,
                       Mode mode, const ModeOptions& opts = {});

}  // namespace invad

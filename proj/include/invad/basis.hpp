#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "invad/errors.hpp"

namespace invad {

/// Machine state: one real per register slot.
using State = Eigen::VectorXd;

struct Instruction;

/// A scalar basis function. `arity` counts slot operands; ops such as
/// `add_const` additionally carry one literal that never counts as active.
struct BasisOp {
  using EvalFn = double (*)(std::span<const double> args, double literal);
  using PartialsFn = std::array<double, 2> (*)(std::span<const double> args,
                                               double literal);
  using DomainFn = bool (*)(std::span<const double> args, double literal);
  // Recovers operand `pos` from the op result and the remaining operands.
  // Returns nullopt when that operand is not determined by the others.
  using InverseFn = std::optional<double> (*)(std::size_t pos, double result,
                                              std::span<const double> args,
                                              double literal);

  std::string name;
  std::size_t arity = 1;
  bool takes_literal = false;
  EvalFn eval = nullptr;
  PartialsFn partials = nullptr;
  DomainFn in_domain = nullptr;
  InverseFn local_inverse = nullptr;

  bool has_local_inverse() const noexcept { return local_inverse != nullptr; }
};

class OpRegistry {
 public:
  explicit OpRegistry(std::vector<BasisOp> ops);

  /// nullptr when no op has that name.
  const BasisOp* find(std::string_view name) const noexcept;
  const BasisOp& at(std::string_view name) const;
  std::span<const BasisOp> ops() const noexcept { return ops_; }

 private:
  std::vector<BasisOp> ops_;
};

/// The process-wide registry of built-in ops. Pointers into it stay valid
/// for the lifetime of the program.
const OpRegistry& builtin_ops();

/// Partials of one step: `a` with respect to the overwritten slot, `bs` with
/// respect to the other active sources in source order.
struct StepLinearization {
  double a = 1.0;
  std::vector<double> bs;
};

inline constexpr double kDefaultSingularTol = 1e-12;

StepLinearization linearize_step(const Instruction& instr,
                                 const State& pre_state,
                                 std::size_t step = kNoStep);

inline bool is_step_invertible(const StepLinearization& lin,
                               double tol = kDefaultSingularTol) {
  return std::abs(lin.a) > tol;
}

}  // namespace invad

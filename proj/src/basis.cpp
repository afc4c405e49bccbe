#include "invad/basis.hpp"

#include <cmath>

#include "invad/trace.hpp"

namespace invad {
namespace {

using Args = std::span<const double>;
using Partials = std::array<double, 2>;

bool always(Args, double) { return true; }

BasisOp unary(std::string name, BasisOp::EvalFn eval, BasisOp::PartialsFn d,
              BasisOp::DomainFn dom, BasisOp::InverseFn inv) {
  return BasisOp{std::move(name), 1, false, eval, d, dom, inv};
}

BasisOp binary(std::string name, BasisOp::EvalFn eval, BasisOp::PartialsFn d,
               BasisOp::DomainFn dom, BasisOp::InverseFn inv) {
  return BasisOp{std::move(name), 2, false, eval, d, dom, inv};
}

BasisOp with_literal(std::string name, BasisOp::EvalFn eval,
                     BasisOp::PartialsFn d, BasisOp::DomainFn dom,
                     BasisOp::InverseFn inv) {
  return BasisOp{std::move(name), 1, true, eval, d, dom, inv};
}

std::vector<BasisOp> make_builtins() {
  std::vector<BasisOp> ops;

  ops.push_back(binary(
      "add", [](Args x, double) { return x[0] + x[1]; },
      [](Args, double) { return Partials{1.0, 1.0}; }, always,
      [](std::size_t pos, double r, Args x, double) -> std::optional<double> {
        return r - x[1 - pos];
      }));
  ops.push_back(binary(
      "sub", [](Args x, double) { return x[0] - x[1]; },
      [](Args, double) { return Partials{1.0, -1.0}; }, always,
      [](std::size_t pos, double r, Args x, double) -> std::optional<double> {
        return pos == 0 ? r + x[1] : x[0] - r;
      }));
  ops.push_back(binary(
      "mul", [](Args x, double) { return x[0] * x[1]; },
      [](Args x, double) { return Partials{x[1], x[0]}; }, always,
      [](std::size_t pos, double r, Args x, double) -> std::optional<double> {
        const double other = x[1 - pos];
        if (other == 0.0) return std::nullopt;
        return r / other;
      }));
  ops.push_back(binary(
      "div", [](Args x, double) { return x[0] / x[1]; },
      [](Args x, double) {
        return Partials{1.0 / x[1], -x[0] / (x[1] * x[1])};
      },
      [](Args x, double) { return x[1] != 0.0; },
      [](std::size_t pos, double r, Args x, double) -> std::optional<double> {
        if (pos == 0) return r * x[1];
        if (r == 0.0) return std::nullopt;
        return x[0] / r;
      }));

  ops.push_back(unary(
      "neg", [](Args x, double) { return -x[0]; },
      [](Args, double) { return Partials{-1.0, 0.0}; }, always,
      [](std::size_t, double r, Args, double) -> std::optional<double> {
        return -r;
      }));
  ops.push_back(unary(
      "square", [](Args x, double) { return x[0] * x[0]; },
      [](Args x, double) { return Partials{2.0 * x[0], 0.0}; }, always,
      nullptr));
  ops.push_back(unary(
      "sqrt", [](Args x, double) { return std::sqrt(x[0]); },
      [](Args x, double) { return Partials{0.5 / std::sqrt(x[0]), 0.0}; },
      [](Args x, double) { return x[0] > 0.0; },
      [](std::size_t, double r, Args, double) -> std::optional<double> {
        return r * r;
      }));
  ops.push_back(unary(
      "log", [](Args x, double) { return std::log(x[0]); },
      [](Args x, double) { return Partials{1.0 / x[0], 0.0}; },
      [](Args x, double) { return x[0] > 0.0; },
      [](std::size_t, double r, Args, double) -> std::optional<double> {
        return std::exp(r);
      }));
  ops.push_back(unary(
      "exp", [](Args x, double) { return std::exp(x[0]); },
      [](Args x, double) { return Partials{std::exp(x[0]), 0.0}; }, always,
      [](std::size_t, double r, Args, double) -> std::optional<double> {
        if (r <= 0.0) return std::nullopt;
        return std::log(r);
      }));
  ops.push_back(unary(
      "sin", [](Args x, double) { return std::sin(x[0]); },
      [](Args x, double) { return Partials{std::cos(x[0]), 0.0}; }, always,
      nullptr));
  ops.push_back(unary(
      "cos", [](Args x, double) { return std::cos(x[0]); },
      [](Args x, double) { return Partials{-std::sin(x[0]), 0.0}; }, always,
      nullptr));
  ops.push_back(unary(
      "atan", [](Args x, double) { return std::atan(x[0]); },
      [](Args x, double) { return Partials{1.0 / (1.0 + x[0] * x[0]), 0.0}; },
      always,
      [](std::size_t, double r, Args, double) -> std::optional<double> {
        return std::tan(r);
      }));

  ops.push_back(with_literal(
      "add_const", [](Args x, double c) { return x[0] + c; },
      [](Args, double) { return Partials{1.0, 0.0}; }, always,
      [](std::size_t, double r, Args, double c) -> std::optional<double> {
        return r - c;
      }));
  ops.push_back(with_literal(
      "sub_const", [](Args x, double c) { return x[0] - c; },
      [](Args, double) { return Partials{1.0, 0.0}; }, always,
      [](std::size_t, double r, Args, double c) -> std::optional<double> {
        return r + c;
      }));
  ops.push_back(with_literal(
      "mul_const", [](Args x, double c) { return x[0] * c; },
      [](Args, double c) { return Partials{c, 0.0}; }, always,
      [](std::size_t, double r, Args, double c) -> std::optional<double> {
        if (c == 0.0) return std::nullopt;
        return r / c;
      }));
  ops.push_back(with_literal(
      "div_const", [](Args x, double c) { return x[0] / c; },
      [](Args, double c) { return Partials{1.0 / c, 0.0}; },
      [](Args, double c) { return c != 0.0; },
      [](std::size_t, double r, Args, double c) -> std::optional<double> {
        return r * c;
      }));

  return ops;
}

}  // namespace

OpRegistry::OpRegistry(std::vector<BasisOp> ops) : ops_(std::move(ops)) {}

const BasisOp* OpRegistry::find(std::string_view name) const noexcept {
  for (const auto& op : ops_) {
    if (op.name == name) return &op;
  }
  return nullptr;
}

const BasisOp& OpRegistry::at(std::string_view name) const {
  if (const BasisOp* op = find(name)) return *op;
  throw ValidationError("unknown op '" + std::string(name) + "'");
}

const OpRegistry& builtin_ops() {
  static const OpRegistry registry(make_builtins());
  return registry;
}

StepLinearization linearize_step(const Instruction& instr,
                                 const State& pre_state, std::size_t step) {
  const BasisOp& op = *instr.op;
  std::array<double, 2> args{};
  for (std::size_t i = 0; i < instr.srcs.size(); ++i) {
    args[i] = pre_state[instr.srcs[i].index];
  }
  const std::span<const double> view(args.data(), instr.srcs.size());
  if (!op.in_domain(view, instr.literal)) throw DomainError(step, op.name);

  const auto partials = op.partials(view, instr.literal);
  StepLinearization lin;
  lin.a = 0.0;
  for (std::size_t i = 0; i < instr.srcs.size(); ++i) {
    if (!instr.active[i]) continue;
    if (instr.srcs[i] == instr.dest) {
      lin.a = partials[i];
    } else {
      lin.bs.push_back(partials[i]);
    }
  }
  return lin;
}

}  // namespace invad

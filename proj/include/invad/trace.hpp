#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "invad/basis.hpp"

namespace invad {

struct SlotId {
  std::uint32_t index = 0;

  constexpr SlotId() = default;
  constexpr explicit SlotId(std::uint32_t i) : index(i) {}
  constexpr explicit SlotId(std::size_t i)
      : index(static_cast<std::uint32_t>(i)) {}
  constexpr explicit SlotId(int i) : index(static_cast<std::uint32_t>(i)) {}

  friend constexpr auto operator<=>(SlotId, SlotId) = default;
};

/// One basis-op application. In overwrite form `dest` is one of the active
/// `srcs`; traces lowered from general DAGs may also write a fresh slot.
struct Instruction {
  const BasisOp* op = nullptr;
  SlotId dest;
  std::vector<SlotId> srcs;
  std::vector<bool> active;
  double literal = 0.0;

  bool overwrites_source() const;

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

/// Builds an instruction over a built-in op; every source starts active.
Instruction make_instruction(std::string_view op, SlotId dest,
                             std::vector<SlotId> srcs, double literal = 0.0);

/// Pre-step machine states recorded by a primal sweep.
class Tape {
 public:
  void record(const State& pre_state) { states_.push_back(pre_state); }
  std::size_t size() const noexcept { return states_.size(); }
  const State& pre_state(std::size_t step) const { return states_.at(step); }

 private:
  std::vector<State> states_;
};

/// A straight-line program over a register file of `width` slots.
/// Immutable after construction. Passive slots hold side parameters: they
/// are never written and never count as active.
class Trace {
 public:
  Trace(std::size_t width, std::vector<Instruction> instrs,
        std::vector<SlotId> inputs, std::vector<SlotId> outputs,
        std::vector<SlotId> passive = {});

  /// Convenience for the common case where every slot is both an input and
  /// an output, in slot order.
  static Trace square(std::size_t width, std::vector<Instruction> instrs,
                      std::vector<SlotId> passive = {});

  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return instrs_.size(); }
  const std::vector<Instruction>& instructions() const noexcept {
    return instrs_;
  }
  const Instruction& operator[](std::size_t t) const { return instrs_[t]; }
  const std::vector<SlotId>& inputs() const noexcept { return inputs_; }
  const std::vector<SlotId>& outputs() const noexcept { return outputs_; }
  const std::vector<SlotId>& passive() const noexcept { return passive_; }
  bool is_passive(SlotId s) const;

  /// Active input count; the width every cut must hold to be constant width.
  std::size_t io_width() const;

  /// Every instruction overwrites one of its active sources.
  bool is_overwrite_form() const;

  /// Throws ValidationError unless the trace is an overwrite-form map of
  /// the full register file onto itself.
  void require_invertible_shape() const;

  friend bool operator==(const Trace&, const Trace&) = default;

 private:
  std::size_t width_;
  std::vector<Instruction> instrs_;
  std::vector<SlotId> inputs_;
  std::vector<SlotId> outputs_;
  std::vector<SlotId> passive_;
};

struct PrimalResult {
  State y;
  Tape tape;
};

/// Runs the program from `x`, recording each pre-step state.
PrimalResult eval_primal(const Trace& trace, const State& x);

/// Runs the program without recording anything.
State run_primal(const Trace& trace, const State& x);

/// Applies instruction `t` to `state` in place.
void apply_instruction(const Instruction& instr, State& state,
                       std::size_t step = kNoStep);

/// Live active slot counts at each of the T+1 cuts.
std::vector<std::size_t> width_profile(const Trace& trace);

struct WidthViolation {
  std::size_t cut;
  std::size_t width;
};

/// nullopt when every cut holds exactly `io_width()` live active slots,
/// otherwise the first offending cut.
std::optional<WidthViolation> check_constant_width(const Trace& trace);

}  // namespace invad

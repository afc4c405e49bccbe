#include "invad/trace.hpp"

#include <algorithm>
#include <array>
#include <string>

namespace invad {

bool Instruction::overwrites_source() const {
  for (std::size_t i = 0; i < srcs.size(); ++i) {
    if (srcs[i] == dest && active[i]) return true;
  }
  return false;
}

Instruction make_instruction(std::string_view op, SlotId dest,
                             std::vector<SlotId> srcs, double literal) {
  Instruction instr;
  instr.op = &builtin_ops().at(op);
  if (srcs.size() != instr.op->arity) {
    throw ValidationError("'" + instr.op->name + "' takes " +
                          std::to_string(instr.op->arity) + " operand(s), got " +
                          std::to_string(srcs.size()));
  }
  instr.dest = dest;
  instr.active.assign(srcs.size(), true);
  instr.srcs = std::move(srcs);
  instr.literal = literal;
  return instr;
}

namespace {

void check_slot(SlotId s, std::size_t width, const std::string& where) {
  if (s.index >= width) {
    throw ValidationError(where + ": slot r" + std::to_string(s.index) +
                          " out of range for width " + std::to_string(width));
  }
}

bool covers_all_slots(const std::vector<SlotId>& slots, std::size_t width) {
  if (slots.size() != width) return false;
  std::vector<bool> seen(width, false);
  for (SlotId s : slots) {
    if (seen[s.index]) return false;
    seen[s.index] = true;
  }
  return true;
}

}  // namespace

Trace::Trace(std::size_t width, std::vector<Instruction> instrs,
             std::vector<SlotId> inputs, std::vector<SlotId> outputs,
             std::vector<SlotId> passive)
    : width_(width),
      instrs_(std::move(instrs)),
      inputs_(std::move(inputs)),
      outputs_(std::move(outputs)),
      passive_(std::move(passive)) {
  std::sort(passive_.begin(), passive_.end());
  passive_.erase(std::unique(passive_.begin(), passive_.end()), passive_.end());
  for (SlotId s : inputs_) check_slot(s, width_, "inputs");
  for (SlotId s : outputs_) check_slot(s, width_, "outputs");
  for (SlotId s : passive_) check_slot(s, width_, "passive");

  for (std::size_t t = 0; t < instrs_.size(); ++t) {
    Instruction& instr = instrs_[t];
    const std::string where = "instruction " + std::to_string(t);
    if (instr.op == nullptr) throw ValidationError(where + ": missing op");
    if (instr.srcs.size() != instr.op->arity) {
      throw ValidationError(where + ": '" + instr.op->name + "' takes " +
                            std::to_string(instr.op->arity) + " operand(s)");
    }
    check_slot(instr.dest, width_, where);
    for (std::size_t i = 0; i < instr.srcs.size(); ++i) {
      check_slot(instr.srcs[i], width_, where);
      for (std::size_t j = 0; j < i; ++j) {
        if (instr.srcs[i] == instr.srcs[j]) {
          throw ValidationError(where + ": repeated source slot r" +
                                std::to_string(instr.srcs[i].index));
        }
      }
    }
    if (is_passive(instr.dest)) {
      throw ValidationError(where + ": writes passive slot r" +
                            std::to_string(instr.dest.index));
    }
    if (instr.op->takes_literal) {
      const double probe = 1.0;
      if (!instr.op->in_domain(std::span<const double>(&probe, 1),
                               instr.literal)) {
        throw ValidationError(where + ": literal outside the domain of '" +
                              instr.op->name + "'");
      }
    }
    instr.active.resize(instr.srcs.size());
    for (std::size_t i = 0; i < instr.srcs.size(); ++i) {
      instr.active[i] = !is_passive(instr.srcs[i]);
    }
  }
}

Trace Trace::square(std::size_t width, std::vector<Instruction> instrs,
                    std::vector<SlotId> passive) {
  std::vector<SlotId> all;
  for (std::size_t i = 0; i < width; ++i) all.emplace_back(i);
  return Trace(width, std::move(instrs), all, all, std::move(passive));
}

bool Trace::is_passive(SlotId s) const {
  return std::binary_search(passive_.begin(), passive_.end(), s);
}

std::size_t Trace::io_width() const {
  return static_cast<std::size_t>(std::count_if(
      inputs_.begin(), inputs_.end(), [&](SlotId s) { return !is_passive(s); }));
}

bool Trace::is_overwrite_form() const {
  return std::all_of(instrs_.begin(), instrs_.end(),
                     [](const Instruction& i) { return i.overwrites_source(); });
}

void Trace::require_invertible_shape() const {
  if (!covers_all_slots(inputs_, width_) || !covers_all_slots(outputs_, width_)) {
    throw ValidationError(
        "inverse modes need inputs and outputs to cover every slot");
  }
  for (std::size_t t = 0; t < instrs_.size(); ++t) {
    if (!instrs_[t].overwrites_source()) {
      throw ValidationError("instruction " + std::to_string(t) +
                            " does not overwrite an active source");
    }
  }
}

void apply_instruction(const Instruction& instr, State& state,
                       std::size_t step) {
  std::array<double, 2> args{};
  for (std::size_t i = 0; i < instr.srcs.size(); ++i) {
    args[i] = state[instr.srcs[i].index];
  }
  const std::span<const double> view(args.data(), instr.srcs.size());
  if (!instr.op->in_domain(view, instr.literal)) {
    throw DomainError(step, instr.op->name);
  }
  state[instr.dest.index] = instr.op->eval(view, instr.literal);
}

PrimalResult eval_primal(const Trace& trace, const State& x) {
  if (static_cast<std::size_t>(x.size()) != trace.width()) {
    throw ValidationError("state has " + std::to_string(x.size()) +
                          " entries, trace width is " +
                          std::to_string(trace.width()));
  }
  PrimalResult result{x, Tape{}};
  for (std::size_t t = 0; t < trace.size(); ++t) {
    result.tape.record(result.y);
    apply_instruction(trace[t], result.y, t);
  }
  return result;
}

State run_primal(const Trace& trace, const State& x) {
  if (static_cast<std::size_t>(x.size()) != trace.width()) {
    throw ValidationError("state has " + std::to_string(x.size()) +
                          " entries, trace width is " +
                          std::to_string(trace.width()));
  }
  State y = x;
  for (std::size_t t = 0; t < trace.size(); ++t) apply_instruction(trace[t], y, t);
  return y;
}

std::vector<std::size_t> width_profile(const Trace& trace) {
  std::vector<bool> live(trace.width(), false);
  for (SlotId s : trace.outputs()) {
    if (!trace.is_passive(s)) live[s.index] = true;
  }
  const auto count = [&] {
    return static_cast<std::size_t>(std::count(live.begin(), live.end(), true));
  };

  std::vector<std::size_t> profile(trace.size() + 1);
  profile[trace.size()] = count();
  for (std::size_t t = trace.size(); t-- > 0;) {
    const Instruction& instr = trace[t];
    live[instr.dest.index] = false;
    for (std::size_t i = 0; i < instr.srcs.size(); ++i) {
      if (instr.active[i]) live[instr.srcs[i].index] = true;
    }
    profile[t] = count();
  }
  return profile;
}

std::optional<WidthViolation> check_constant_width(const Trace& trace) {
  const auto profile = width_profile(trace);
  const std::size_t n = trace.io_width();
  for (std::size_t cut = 0; cut < profile.size(); ++cut) {
    if (profile[cut] != n) return WidthViolation{cut, profile[cut]};
  }
  return std::nullopt;
}

}  // namespace invad

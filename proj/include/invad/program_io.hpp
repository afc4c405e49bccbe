#pragma once

#include <string>
#include <string_view>
#include <variant>

#include "invad/dag.hpp"

namespace invad {

// Line-oriented program text:
//
//   width 2
//   inputs r0 r1
//   outputs r0 r1
//   passive r2            (optional, traces only)
//   r0 = mul r0 r1        # '#' starts a comment
//   r0 = sub_const r0 2.5
//
// Operands are registers rK, temporaries tmpK, or a trailing literal for
// the *_const ops. A program that uses temporaries is a DAG; otherwise it
// is a trace and every line must overwrite one of its operands.

using Program = std::variant<Trace, Dag>;

/// Throws ParseError (with 1-based line and column) on malformed text and
/// ValidationError on well-formed text that breaks a program invariant.
Program parse_program(std::string_view text);

/// Rejects programs that use temporaries.
Trace parse_trace(std::string_view text);

/// Accepts both forms; registers are SSA-renamed into DAG values.
Dag parse_dag(std::string_view text);

/// Normalized text. parse_trace(print_program(t)) == t and
/// parse_dag(print_program(d)) == d.
std::string print_program(const Trace& trace);
std::string print_program(const Dag& dag);

/// Shortest decimal that round-trips the binary64 value.
std::string format_literal(double value);

}  // namespace invad

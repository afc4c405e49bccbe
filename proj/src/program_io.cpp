#include "invad/program_io.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <optional>
#include <sstream>
#include <vector>

namespace invad {
namespace {

struct Token {
  std::string_view text;
  std::size_t col;  // 1-based
};

struct Line {
  std::size_t number;
  std::vector<Token> tokens;
};

std::vector<Line> tokenize(std::string_view text) {
  std::vector<Line> lines;
  std::size_t number = 0;
  while (!text.empty()) {
    ++number;
    const auto eol = text.find('\n');
    std::string_view raw = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) {
      raw = raw.substr(0, hash);
    }
    Line line{number, {}};
    std::size_t i = 0;
    while (i < raw.size()) {
      while (i < raw.size() && (raw[i] == ' ' || raw[i] == '\t' || raw[i] == '\r')) ++i;
      const std::size_t start = i;
      while (i < raw.size() && raw[i] != ' ' && raw[i] != '\t' && raw[i] != '\r') ++i;
      if (i > start) line.tokens.push_back({raw.substr(start, i - start), start + 1});
    }
    if (!line.tokens.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

enum class NameKind { Register, Temporary };

struct Name {
  NameKind kind;
  std::size_t index;
  friend auto operator<=>(const Name&, const Name&) = default;
};

std::optional<std::size_t> parse_index(std::string_view digits) {
  if (digits.empty()) return std::nullopt;
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::nullopt;
  return value;
}

std::optional<Name> try_name(std::string_view s) {
  if (s.starts_with("tmp")) {
    if (auto i = parse_index(s.substr(3))) return Name{NameKind::Temporary, *i};
    return std::nullopt;
  }
  if (s.starts_with("r")) {
    if (auto i = parse_index(s.substr(1))) return Name{NameKind::Register, *i};
  }
  return std::nullopt;
}

Name expect_name(const Line& line, const Token& tok) {
  if (auto n = try_name(tok.text)) return *n;
  throw ParseError(line.number, tok.col,
                   "expected a register (rK) or temporary (tmpK), got '" +
                       std::string(tok.text) + "'");
}

std::optional<double> try_literal(std::string_view s) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

struct Statement {
  std::size_t line;
  Name dest;
  const BasisOp* op;
  std::vector<Name> args;
  double literal = 0.0;
};

struct Parsed {
  std::size_t width = 0;
  std::vector<Name> inputs;
  std::vector<Name> outputs;
  std::vector<Name> passive;
  std::vector<Statement> body;
  bool uses_temporaries = false;
};

const Line& header(const std::vector<Line>& lines, std::size_t i, std::string_view keyword) {
  if (i >= lines.size()) {
    throw ParseError(lines.empty() ? 1 : lines.back().number + 1, 1,
                     "missing '" + std::string(keyword) + "' line");
  }
  const Line& line = lines[i];
  if (line.tokens[0].text != keyword) {
    throw ParseError(line.number, line.tokens[0].col,
                     "expected '" + std::string(keyword) + "'");
  }
  return line;
}

Parsed parse_text(std::string_view text) {
  const auto lines = tokenize(text);
  Parsed p;

  const Line& width_line = header(lines, 0, "width");
  if (width_line.tokens.size() != 2) {
    throw ParseError(width_line.number, width_line.tokens[0].col, "expected 'width <n>'");
  }
  const auto width = parse_index(width_line.tokens[1].text);
  if (!width) {
    throw ParseError(width_line.number, width_line.tokens[1].col, "width must be a count");
  }
  p.width = *width;

  const auto check_register = [&](const Line& line, const Token& tok, const Name& n) {
    if (n.kind == NameKind::Temporary) p.uses_temporaries = true;
    if (n.kind == NameKind::Register && n.index >= p.width) {
      throw ValidationError("line " + std::to_string(line.number) + ", column " +
                            std::to_string(tok.col) + ": register r" +
                            std::to_string(n.index) + " out of range for width " +
                            std::to_string(p.width));
    }
  };
  const auto name_list = [&](const Line& line) {
    std::vector<Name> out;
    for (std::size_t i = 1; i < line.tokens.size(); ++i) {
      out.push_back(expect_name(line, line.tokens[i]));
      check_register(line, line.tokens[i], out.back());
    }
    return out;
  };
  p.inputs = name_list(header(lines, 1, "inputs"));
  p.outputs = name_list(header(lines, 2, "outputs"));

  std::size_t next = 3;
  if (next < lines.size() && lines[next].tokens[0].text == "passive") {
    p.passive = name_list(lines[next]);
    ++next;
  }

  for (; next < lines.size(); ++next) {
    const Line& line = lines[next];
    const auto& toks = line.tokens;
    if (toks.size() < 3 || toks[1].text != "=") {
      throw ParseError(line.number, toks[0].col, "expected '<dest> = <op> <args...>'");
    }
    Statement st;
    st.line = line.number;
    st.dest = expect_name(line, toks[0]);
    check_register(line, toks[0], st.dest);
    st.op = builtin_ops().find(toks[2].text);
    if (st.op == nullptr) {
      throw ParseError(line.number, toks[2].col,
                       "unknown op '" + std::string(toks[2].text) + "'");
    }
    const std::size_t expected = st.op->arity + (st.op->takes_literal ? 1 : 0);
    if (toks.size() - 3 != expected) {
      const Token& at = toks.size() > 3 + expected ? toks[3 + expected] : toks[2];
      throw ParseError(line.number, at.col,
                       "'" + st.op->name + "' takes " + std::to_string(expected) +
                           " argument(s), got " + std::to_string(toks.size() - 3));
    }
    for (std::size_t a = 0; a < st.op->arity; ++a) {
      const Token& tok = toks[3 + a];
      const Name n = expect_name(line, tok);
      check_register(line, tok, n);
      st.args.push_back(n);
    }
    if (st.op->takes_literal) {
      const Token& tok = toks.back();
      const auto value = try_literal(tok.text);
      if (!value) {
        throw ParseError(line.number, tok.col,
                         "expected a numeric literal, got '" + std::string(tok.text) + "'");
      }
      st.literal = *value;
    }
    p.body.push_back(std::move(st));
  }
  return p;
}

SlotId to_slot(const Name& n) { return SlotId(n.index); }

Trace build_trace(const Parsed& p) {
  if (p.uses_temporaries) {
    throw ValidationError("temporaries are only allowed in DAG programs");
  }
  std::vector<Instruction> instrs;
  for (const Statement& st : p.body) {
    Instruction instr;
    instr.op = st.op;
    instr.dest = to_slot(st.dest);
    for (const Name& a : st.args) instr.srcs.push_back(to_slot(a));
    instr.active.assign(instr.srcs.size(), true);
    instr.literal = st.literal;
    if (std::find(instr.srcs.begin(), instr.srcs.end(), instr.dest) == instr.srcs.end()) {
      throw ValidationError("line " + std::to_string(st.line) +
                            ": destination must be one of the operands in a trace");
    }
    instrs.push_back(std::move(instr));
  }
  const auto slots = [](const std::vector<Name>& names) {
    std::vector<SlotId> out;
    for (const Name& n : names) out.push_back(to_slot(n));
    return out;
  };
  Trace trace(p.width, std::move(instrs), slots(p.inputs), slots(p.outputs),
              slots(p.passive));
  for (std::size_t t = 0; t < trace.size(); ++t) {
    if (!trace[t].overwrites_source()) {
      throw ValidationError("line " + std::to_string(p.body[t].line) +
                            ": destination is a passive operand");
    }
  }
  return trace;
}

Dag build_dag(const Parsed& p) {
  if (!p.passive.empty()) {
    throw ValidationError("passive slots are only allowed in traces");
  }
  std::map<Name, ValueId> current;
  for (std::size_t j = 0; j < p.inputs.size(); ++j) {
    if (p.inputs[j].kind != NameKind::Register) {
      throw ValidationError("DAG inputs must be registers");
    }
    if (!current.emplace(p.inputs[j], j).second) {
      throw ValidationError("register r" + std::to_string(p.inputs[j].index) +
                            " listed twice in inputs");
    }
  }
  const auto name_of = [](const Name& n) {
    return (n.kind == NameKind::Register ? "r" : "tmp") + std::to_string(n.index);
  };
  const std::size_t n = p.inputs.size();
  std::vector<DagNode> nodes;
  for (const Statement& st : p.body) {
    DagNode node{st.op, {}, st.literal};
    for (const Name& a : st.args) {
      const auto it = current.find(a);
      if (it == current.end()) {
        throw ValidationError("line " + std::to_string(st.line) + ": " + name_of(a) +
                              " is read before it holds a value");
      }
      node.inputs.push_back(it->second);
    }
    nodes.push_back(std::move(node));
    current[st.dest] = n + nodes.size() - 1;
  }
  std::vector<ValueId> outputs;
  for (const Name& o : p.outputs) {
    const auto it = current.find(o);
    if (it == current.end()) {
      throw ValidationError("output " + name_of(o) + " never holds a value");
    }
    outputs.push_back(it->second);
  }
  return Dag(n, std::move(nodes), std::move(outputs));
}

}  // namespace

Program parse_program(std::string_view text) {
  const Parsed p = parse_text(text);
  if (p.uses_temporaries) return build_dag(p);
  return build_trace(p);
}

Trace parse_trace(std::string_view text) { return build_trace(parse_text(text)); }

Dag parse_dag(std::string_view text) { return build_dag(parse_text(text)); }

std::string format_literal(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

namespace {

void print_slots(std::ostringstream& out, const char* keyword,
                 const std::vector<SlotId>& slots) {
  out << keyword;
  for (SlotId s : slots) out << " r" << s.index;
  out << '\n';
}

}  // namespace

std::string print_program(const Trace& trace) {
  std::ostringstream out;
  out << "width " << trace.width() << '\n';
  print_slots(out, "inputs", trace.inputs());
  print_slots(out, "outputs", trace.outputs());
  if (!trace.passive().empty()) print_slots(out, "passive", trace.passive());
  for (const Instruction& instr : trace.instructions()) {
    out << 'r' << instr.dest.index << " = " << instr.op->name;
    for (SlotId s : instr.srcs) out << " r" << s.index;
    if (instr.op->takes_literal) out << ' ' << format_literal(instr.literal);
    out << '\n';
  }
  return out.str();
}

std::string print_program(const Dag& dag) {
  const auto name = [&](ValueId v) {
    return dag.is_input(v) ? "r" + std::to_string(v)
                           : "tmp" + std::to_string(v - dag.num_inputs());
  };
  std::ostringstream out;
  out << "width " << dag.num_inputs() << "\ninputs";
  for (std::size_t i = 0; i < dag.num_inputs(); ++i) out << " r" << i;
  out << "\noutputs";
  for (ValueId v : dag.outputs()) out << ' ' << name(v);
  out << '\n';
  for (std::size_t i = 0; i < dag.num_nodes(); ++i) {
    const DagNode& node = dag.node(i);
    out << "tmp" << i << " = " << node.op->name;
    for (ValueId v : node.inputs) out << ' ' << name(v);
    if (node.op->takes_literal) out << ' ' << format_literal(node.literal);
    out << '\n';
  }
  return out.str();
}

}  // namespace invad

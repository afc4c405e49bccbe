#include "invad/dag.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <string>

#include "invad/lumpify.hpp"

namespace invad {

Dag::Dag(std::size_t num_inputs, std::vector<DagNode> nodes,
         std::vector<ValueId> outputs)
    : num_inputs_(num_inputs), nodes_(std::move(nodes)), outputs_(std::move(outputs)) {
  is_output_.assign(num_values(), false);
  consumers_.assign(num_values(), {});
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const DagNode& node = nodes_[i];
    const std::string where = "node " + std::to_string(i);
    if (node.op == nullptr) throw ValidationError(where + ": missing op");
    if (node.inputs.size() != node.op->arity) {
      throw ValidationError(where + ": '" + node.op->name + "' takes " +
                            std::to_string(node.op->arity) + " operand(s)");
    }
    for (std::size_t a = 0; a < node.inputs.size(); ++a) {
      const ValueId v = node.inputs[a];
      if (v >= value_of(i)) {
        throw ValidationError(where +
                              ": operands must be graph inputs or earlier nodes");
      }
      for (std::size_t b = 0; b < a; ++b) {
        if (node.inputs[b] == v) {
          throw ValidationError(where + ": repeated operand");
        }
      }
      consumers_[v].push_back(i);
    }
  }
  for (ValueId v : outputs_) {
    if (v >= num_values()) throw ValidationError("output refers to unknown value");
    if (is_output_[v]) throw ValidationError("a value is listed as output twice");
    is_output_[v] = true;
  }
}

std::vector<double> evaluate_values(const Dag& dag, const State& x) {
  if (static_cast<std::size_t>(x.size()) != dag.num_inputs()) {
    throw ValidationError("DAG takes " + std::to_string(dag.num_inputs()) +
                          " inputs, got " + std::to_string(x.size()));
  }
  std::vector<double> values(dag.num_values());
  for (std::size_t i = 0; i < dag.num_inputs(); ++i) values[i] = x[i];
  for (std::size_t i = 0; i < dag.num_nodes(); ++i) {
    const DagNode& node = dag.node(i);
    std::array<double, 2> args{};
    for (std::size_t a = 0; a < node.inputs.size(); ++a) args[a] = values[node.inputs[a]];
    const std::span<const double> view(args.data(), node.inputs.size());
    if (!node.op->in_domain(view, node.literal)) throw DomainError(i, node.op->name);
    values[dag.value_of(i)] = node.op->eval(view, node.literal);
  }
  return values;
}

State evaluate_dag(const Dag& dag, const State& x) {
  const auto values = evaluate_values(dag, x);
  State y(dag.outputs().size());
  for (std::size_t j = 0; j < dag.outputs().size(); ++j) y[j] = values[dag.outputs()[j]];
  return y;
}

Dag dag_from_trace(const Trace& trace) {
  if (!trace.passive().empty()) {
    throw ValidationError("DAG conversion does not support passive slots");
  }
  std::vector<std::optional<ValueId>> current(trace.width());
  for (std::size_t j = 0; j < trace.inputs().size(); ++j) {
    current[trace.inputs()[j].index] = j;
  }
  const std::size_t n = trace.inputs().size();
  std::vector<DagNode> nodes;
  for (std::size_t t = 0; t < trace.size(); ++t) {
    const Instruction& instr = trace[t];
    DagNode node{instr.op, {}, instr.literal};
    for (SlotId s : instr.srcs) {
      if (!current[s.index]) {
        throw ValidationError("instruction " + std::to_string(t) +
                              " reads r" + std::to_string(s.index) +
                              " before it holds a value");
      }
      node.inputs.push_back(*current[s.index]);
    }
    nodes.push_back(std::move(node));
    current[instr.dest.index] = n + t;
  }
  std::vector<ValueId> outputs;
  for (SlotId s : trace.outputs()) {
    if (!current[s.index]) {
      throw ValidationError("output r" + std::to_string(s.index) +
                            " never holds a value");
    }
    outputs.push_back(*current[s.index]);
  }
  return Dag(n, std::move(nodes), std::move(outputs));
}

Trace lower_to_trace(const Dag& dag, const LumpSchedule& schedule) {
  const std::size_t n = dag.num_inputs();
  std::vector<std::size_t> remaining(dag.num_values());
  for (ValueId v = 0; v < dag.num_values(); ++v) remaining[v] = dag.consumers(v).size();

  std::vector<SlotId> slot_of(dag.num_values());
  for (std::size_t i = 0; i < n; ++i) slot_of[i] = SlotId(i);
  std::vector<SlotId> free_slots;  // kept sorted, lowest first
  std::size_t width = n;
  const auto release = [&](SlotId s) {
    free_slots.insert(std::lower_bound(free_slots.begin(), free_slots.end(), s), s);
  };

  std::vector<Instruction> instrs;
  for (std::size_t node_index : schedule.order) {
    const DagNode& node = dag.node(node_index);
    Instruction instr;
    instr.op = node.op;
    instr.literal = node.literal;
    std::optional<SlotId> dest;
    std::vector<SlotId> dying;
    for (ValueId u : node.inputs) {
      instr.srcs.push_back(slot_of[u]);
      if (--remaining[u] == 0 && !dag.is_output(u)) {
        if (!dest) {
          dest = slot_of[u];
        } else {
          dying.push_back(slot_of[u]);
        }
      }
    }
    instr.active.assign(instr.srcs.size(), true);
    if (!dest) {
      if (!free_slots.empty()) {
        dest = free_slots.front();
        free_slots.erase(free_slots.begin());
      } else {
        dest = SlotId(width++);
      }
    }
    for (SlotId s : dying) release(s);
    instr.dest = *dest;
    const ValueId produced = dag.value_of(node_index);
    slot_of[produced] = *dest;
    if (dag.consumers(produced).empty() && !dag.is_output(produced)) release(*dest);
    instrs.push_back(std::move(instr));
  }

  std::vector<SlotId> inputs, outputs;
  for (std::size_t i = 0; i < n; ++i) inputs.emplace_back(i);
  for (ValueId v : dag.outputs()) outputs.push_back(slot_of[v]);
  return Trace(width, std::move(instrs), std::move(inputs), std::move(outputs));
}

}  // namespace invad

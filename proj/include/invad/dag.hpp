#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "invad/trace.hpp"

namespace invad {

/// Values of a DAG share one index space: graph inputs are [0, n), node i
/// produces value n + i.
using ValueId = std::size_t;

struct DagNode {
  const BasisOp* op = nullptr;
  std::vector<ValueId> inputs;
  double literal = 0.0;

  friend bool operator==(const DagNode&, const DagNode&) = default;
};

/// A data-flow graph of basis-op applications. Nodes may only read graph
/// inputs or earlier nodes, so node order is itself a topological order.
/// Every value is active.
class Dag {
 public:
  Dag(std::size_t num_inputs, std::vector<DagNode> nodes,
      std::vector<ValueId> outputs);

  std::size_t num_inputs() const noexcept { return num_inputs_; }
  std::size_t num_nodes() const noexcept { return nodes_.size(); }
  std::size_t num_values() const noexcept { return num_inputs_ + nodes_.size(); }
  const std::vector<DagNode>& nodes() const noexcept { return nodes_; }
  const DagNode& node(std::size_t i) const { return nodes_[i]; }
  const std::vector<ValueId>& outputs() const noexcept { return outputs_; }

  ValueId value_of(std::size_t node) const noexcept { return num_inputs_ + node; }
  bool is_input(ValueId v) const noexcept { return v < num_inputs_; }
  bool is_output(ValueId v) const noexcept { return is_output_[v]; }
  /// Nodes reading value `v`.
  const std::vector<std::size_t>& consumers(ValueId v) const {
    return consumers_[v];
  }

  friend bool operator==(const Dag& a, const Dag& b) {
    return a.num_inputs_ == b.num_inputs_ && a.nodes_ == b.nodes_ &&
           a.outputs_ == b.outputs_;
  }

 private:
  std::size_t num_inputs_;
  std::vector<DagNode> nodes_;
  std::vector<ValueId> outputs_;
  std::vector<bool> is_output_;
  std::vector<std::vector<std::size_t>> consumers_;
};

/// Primal values of every DAG value, indexed by ValueId.
std::vector<double> evaluate_values(const Dag& dag, const State& x);

/// Primal outputs, in output order.
State evaluate_dag(const Dag& dag, const State& x);

/// One node per instruction. Graph input j is the initial value of
/// `trace.inputs()[j]`; outputs are the final values of the output slots.
Dag dag_from_trace(const Trace& trace);

struct LumpSchedule;

/// Scalar register-machine form of a scheduled DAG. A node that consumes
/// the last use of an operand overwrites that operand's slot; otherwise it
/// takes the lowest free slot, growing the machine past n when needed.
Trace lower_to_trace(const Dag& dag, const LumpSchedule& schedule);

}  // namespace invad

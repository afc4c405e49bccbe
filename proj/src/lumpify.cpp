#include "invad/lumpify.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>

namespace invad {

const char* objective_name(LumpObjective objective) noexcept {
  switch (objective) {
    case LumpObjective::Size: return "size";
    case LumpObjective::Width: return "width";
    case LumpObjective::LK: return "lk";
  }
  return "?";
}

ScheduleCost schedule_cost(const LumpSchedule& s, LumpObjective objective) {
  ScheduleCost cost;
  for (const Lump& lump : s.lumps) {
    switch (objective) {
      case LumpObjective::Size:
        cost.primary = std::max(cost.primary, lump.size());
        break;
      case LumpObjective::Width:
        cost.primary = std::max(cost.primary, lump.peak_width);
        break;
      case LumpObjective::LK:
        cost.primary = std::max(cost.primary, lump.l);
        cost.secondary = std::max(cost.secondary, lump.k);
        break;
    }
  }
  return cost;
}

namespace {

// Live-width bookkeeping while nodes are scheduled one at a time.
class LiveTracker {
 public:
  explicit LiveTracker(const Dag& dag) : dag_(dag), remaining_(dag.num_values()) {
    for (ValueId v = 0; v < dag.num_values(); ++v) {
      remaining_[v] = dag.consumers(v).size();
    }
    for (ValueId v = 0; v < dag.num_inputs(); ++v) {
      if (remaining_[v] > 0 || dag.is_output(v)) ++width_;
    }
  }

  std::size_t width() const noexcept { return width_; }

  long delta(std::size_t node) const {
    long d = creates_live(node) ? 1 : 0;
    for (ValueId u : dag_.node(node).inputs) {
      if (remaining_[u] == 1 && !dag_.is_output(u)) --d;
    }
    return d;
  }

  void schedule(std::size_t node) {
    width_ = static_cast<std::size_t>(static_cast<long>(width_) + delta(node));
    for (ValueId u : dag_.node(node).inputs) --remaining_[u];
  }

 private:
  bool creates_live(std::size_t node) const {
    const ValueId v = dag_.value_of(node);
    return !dag_.consumers(v).empty() || dag_.is_output(v);
  }

  const Dag& dag_;
  std::vector<std::size_t> remaining_;
  std::size_t width_ = 0;
};

void require_square(const Dag& dag) {
  if (dag.outputs().size() != dag.num_inputs()) {
    throw ValidationError("lumpification needs as many outputs (" +
                          std::to_string(dag.outputs().size()) +
                          ") as inputs (" + std::to_string(dag.num_inputs()) + ")");
  }
}

// Position at which each value becomes available: inputs before any node.
std::vector<std::size_t> availability(const Dag& dag,
                                      const std::vector<std::size_t>& order) {
  std::vector<std::size_t> avail(dag.num_values(), 0);
  for (std::size_t p = 0; p < order.size(); ++p) {
    avail[dag.value_of(order[p])] = p + 1;
  }
  return avail;
}

// Value v is live at cut c when it exists by c and is an output or has a
// consumer scheduled at or after c.
bool live_at(const Dag& dag, const std::vector<std::size_t>& pos_of, ValueId v,
             std::size_t avail, std::size_t cut) {
  if (avail > cut) return false;
  if (dag.is_output(v)) return true;
  return std::any_of(dag.consumers(v).begin(), dag.consumers(v).end(),
                     [&](std::size_t c) { return pos_of[c] >= cut; });
}

std::vector<std::size_t> positions(const Dag& dag,
                                   const std::vector<std::size_t>& order) {
  std::vector<std::size_t> pos_of(dag.num_nodes(), 0);
  for (std::size_t p = 0; p < order.size(); ++p) pos_of[order[p]] = p;
  return pos_of;
}

bool is_topological_permutation(const Dag& dag,
                                const std::vector<std::size_t>& order) {
  if (order.size() != dag.num_nodes()) return false;
  std::vector<bool> done(dag.num_nodes(), false);
  for (std::size_t node : order) {
    if (node >= dag.num_nodes() || done[node]) return false;
    for (ValueId u : dag.node(node).inputs) {
      if (!dag.is_input(u) && !done[u - dag.num_inputs()]) return false;
    }
    done[node] = true;
  }
  return true;
}

}  // namespace

LumpSchedule make_schedule(const Dag& dag, std::vector<std::size_t> order) {
  require_square(dag);
  if (!is_topological_permutation(dag, order)) {
    throw ValidationError("order is not a topological order of every node");
  }
  const std::size_t n = dag.num_inputs();
  LiveTracker tracker(dag);
  std::vector<std::size_t> widths{tracker.width()};
  for (std::size_t node : order) {
    tracker.schedule(node);
    widths.push_back(tracker.width());
  }

  LumpSchedule s;
  s.order = std::move(order);
  for (std::size_t p = 0; p < widths.size(); ++p) {
    if (widths[p] < n) throw WidthUnderflowError(p, widths[p], n);
    if (widths[p] == n) s.cuts.push_back(p);
  }

  const auto pos_of = positions(dag, s.order);
  const auto avail = availability(dag, s.order);
  for (std::size_t c = 0; c + 1 < s.cuts.size(); ++c) {
    Lump lump;
    lump.begin = s.cuts[c];
    lump.end = s.cuts[c + 1];
    lump.peak_width = *std::max_element(widths.begin() + lump.begin,
                                        widths.begin() + lump.end + 1);
    std::vector<ValueId> reads;
    for (std::size_t p = lump.begin; p < lump.end; ++p) {
      const std::size_t node = s.order[p];
      for (ValueId u : dag.node(node).inputs) {
        if (avail[u] <= lump.begin) reads.push_back(u);
      }
      if (live_at(dag, pos_of, dag.value_of(node), p + 1, lump.end)) ++lump.l;
    }
    std::sort(reads.begin(), reads.end());
    lump.k = static_cast<std::size_t>(
        std::unique(reads.begin(), reads.end()) - reads.begin());
    s.lumps.push_back(lump);
  }
  return s;
}

LumpSchedule greedy_schedule(const Dag& dag) {
  require_square(dag);
  LiveTracker tracker(dag);
  std::vector<bool> done(dag.num_nodes(), false);
  std::vector<std::size_t> order;
  order.reserve(dag.num_nodes());
  const auto ready = [&](std::size_t node) {
    if (done[node]) return false;
    return std::all_of(dag.node(node).inputs.begin(), dag.node(node).inputs.end(),
                       [&](ValueId u) {
                         return dag.is_input(u) || done[u - dag.num_inputs()];
                       });
  };
  while (order.size() < dag.num_nodes()) {
    // (class, growth, id): shrink < hold < grow, smaller growth, lower id
    std::optional<std::tuple<int, long, std::size_t>> best;
    for (std::size_t node = 0; node < dag.num_nodes(); ++node) {
      if (!ready(node)) continue;
      const long d = tracker.delta(node);
      const auto key = std::make_tuple(d < 0 ? 0 : d == 0 ? 1 : 2,
                                       d > 0 ? d : 0L, node);
      if (!best || key < *best) best = key;
    }
    const std::size_t pick = std::get<2>(*best);
    tracker.schedule(pick);
    done[pick] = true;
    order.push_back(pick);
  }
  return make_schedule(dag, std::move(order));
}

namespace {

class BruteForce {
 public:
  BruteForce(const Dag& dag, LumpObjective objective)
      : dag_(dag), objective_(objective), n_(dag.num_inputs()),
        remaining_(dag.num_values()), done_(dag.num_nodes(), false) {
    for (ValueId v = 0; v < dag.num_values(); ++v) {
      remaining_[v] = dag.consumers(v).size();
      if (dag.is_input(v) && (remaining_[v] > 0 || dag.is_output(v))) {
        live_ |= bit(v);
      }
    }
  }

  std::optional<std::vector<std::size_t>> run() {
    if (static_cast<std::size_t>(std::popcount(live_)) < n_) return std::nullopt;
    Frame root;
    search(root);
    return best_order_;
  }

 private:
  struct Frame {
    ScheduleCost closed;
    std::size_t lump_size = 0;
    std::size_t lump_peak = 0;
    std::uint64_t lump_produced = 0;
    std::uint64_t lump_reads = 0;
  };

  static std::uint64_t bit(ValueId v) { return std::uint64_t{1} << v; }

  ScheduleCost lower_bound(const Frame& f) const {
    ScheduleCost lb = f.closed;
    if (objective_ == LumpObjective::Size) {
      lb.primary = std::max(lb.primary, f.lump_size);
    } else if (objective_ == LumpObjective::Width) {
      lb.primary = std::max(lb.primary, f.lump_peak);
    }
    return lb;
  }

  void close_lump(Frame& f) const {
    const std::size_t l =
        static_cast<std::size_t>(std::popcount(f.lump_produced & live_));
    const std::size_t k = static_cast<std::size_t>(std::popcount(f.lump_reads));
    switch (objective_) {
      case LumpObjective::Size:
        f.closed.primary = std::max(f.closed.primary, f.lump_size);
        break;
      case LumpObjective::Width:
        f.closed.primary = std::max(f.closed.primary, f.lump_peak);
        break;
      case LumpObjective::LK:
        f.closed.primary = std::max(f.closed.primary, l);
        f.closed.secondary = std::max(f.closed.secondary, k);
        break;
    }
    f.lump_size = 0;
    f.lump_peak = 0;
    f.lump_produced = 0;
    f.lump_reads = 0;
  }

  void search(const Frame& frame) {
    if (best_cost_ && lower_bound(frame) >= *best_cost_) return;
    if (order_.size() == dag_.num_nodes()) {
      best_cost_ = frame.closed;
      best_order_ = order_;
      return;
    }
    for (std::size_t node = 0; node < dag_.num_nodes(); ++node) {
      if (done_[node]) continue;
      const auto& inputs = dag_.node(node).inputs;
      const bool ready = std::all_of(inputs.begin(), inputs.end(), [&](ValueId u) {
        return dag_.is_input(u) || done_[u - dag_.num_inputs()];
      });
      if (!ready) continue;

      const std::uint64_t saved_live = live_;
      const ValueId produced = dag_.value_of(node);
      Frame next = frame;
      for (ValueId u : inputs) {
        if (!(frame.lump_produced & bit(u))) next.lump_reads |= bit(u);
        if (--remaining_[u] == 0 && !dag_.is_output(u)) live_ &= ~bit(u);
      }
      if (!dag_.consumers(produced).empty() || dag_.is_output(produced)) {
        live_ |= bit(produced);
      }
      next.lump_produced |= bit(produced);
      ++next.lump_size;
      const auto width = static_cast<std::size_t>(std::popcount(live_));
      next.lump_peak = std::max({next.lump_peak, width, n_});

      if (width >= n_) {
        if (width == n_) close_lump(next);
        done_[node] = true;
        order_.push_back(node);
        search(next);
        order_.pop_back();
        done_[node] = false;
      }

      live_ = saved_live;
      for (ValueId u : inputs) ++remaining_[u];
    }
  }

  const Dag& dag_;
  LumpObjective objective_;
  std::size_t n_;
  std::vector<std::size_t> remaining_;
  std::vector<bool> done_;
  std::uint64_t live_ = 0;
  std::vector<std::size_t> order_;
  std::optional<ScheduleCost> best_cost_;
  std::optional<std::vector<std::size_t>> best_order_;
};

}  // namespace

LumpSchedule brute_force_schedule(const Dag& dag, LumpObjective objective,
                                  std::size_t node_limit) {
  require_square(dag);
  if (dag.num_nodes() > node_limit) {
    throw SizeLimitError("exhaustive scheduling is limited to " +
                         std::to_string(node_limit) + " nodes, DAG has " +
                         std::to_string(dag.num_nodes()));
  }
  if (dag.num_values() > 64) {
    throw SizeLimitError("exhaustive scheduling is limited to 64 values");
  }
  auto order = BruteForce(dag, objective).run();
  if (!order) {
    throw WidthUnderflowError(0, 0, dag.num_inputs());
  }
  return make_schedule(dag, std::move(*order));
}

bool is_valid_schedule(const Dag& dag, const LumpSchedule& s) {
  if (dag.outputs().size() != dag.num_inputs()) return false;
  if (!is_topological_permutation(dag, s.order)) return false;
  const std::size_t n = dag.num_inputs();
  const auto pos_of = positions(dag, s.order);
  const auto avail = availability(dag, s.order);

  std::vector<std::size_t> expected_cuts;
  for (std::size_t cut = 0; cut <= s.order.size(); ++cut) {
    std::size_t width = 0;
    for (ValueId v = 0; v < dag.num_values(); ++v) {
      if (live_at(dag, pos_of, v, avail[v], cut)) ++width;
    }
    if (width < n) return false;
    if (width == n) expected_cuts.push_back(cut);
  }
  if (expected_cuts != s.cuts) return false;
  if (s.lumps.size() + 1 != s.cuts.size()) return false;
  for (std::size_t i = 0; i < s.lumps.size(); ++i) {
    if (s.lumps[i].begin != s.cuts[i] || s.lumps[i].end != s.cuts[i + 1]) return false;
  }
  return true;
}

LumpPlan plan_lumps(const Dag& dag, LumpSchedule schedule) {
  const std::size_t n = dag.num_inputs();
  const auto pos_of = positions(dag, schedule.order);
  const auto avail = availability(dag, schedule.order);
  // creation rank: inputs by index, then nodes by schedule position
  const auto rank = [&](ValueId v) { return dag.is_input(v) ? v : n + avail[v]; };

  std::vector<SlotId> slot_of(dag.num_values());
  for (std::size_t i = 0; i < n; ++i) slot_of[i] = SlotId(i);

  LumpPlan plan;
  for (const Lump& lump : schedule.lumps) {
    LumpPorts ports;
    std::vector<ValueId> reads;
    for (std::size_t p = lump.begin; p < lump.end; ++p) {
      const std::size_t node = schedule.order[p];
      for (ValueId u : dag.node(node).inputs) {
        if (avail[u] <= lump.begin) reads.push_back(u);
      }
      const ValueId v = dag.value_of(node);
      if (live_at(dag, pos_of, v, avail[v], lump.end)) ports.produced.push_back(v);
    }
    std::sort(reads.begin(), reads.end(),
              [&](ValueId a, ValueId b) { return rank(a) < rank(b); });
    reads.erase(std::unique(reads.begin(), reads.end()), reads.end());
    for (ValueId u : reads) {
      if (live_at(dag, pos_of, u, avail[u], lump.end)) {
        ports.kept.push_back(u);
        ports.kept_slots.push_back(slot_of[u]);
      } else {
        ports.killed.push_back(u);
        ports.killed_slots.push_back(slot_of[u]);
      }
    }
    if (ports.killed.size() != ports.produced.size()) {
      throw ValidationError("lump does not preserve width");
    }
    for (std::size_t i = 0; i < ports.produced.size(); ++i) {
      slot_of[ports.produced[i]] = ports.killed_slots[i];
    }
    plan.ports.push_back(std::move(ports));
  }
  for (ValueId v : dag.outputs()) plan.output_slots.push_back(slot_of[v]);
  plan.schedule = std::move(schedule);
  return plan;
}

LumpLinearization lump_linearization(const Dag& dag, const LumpPlan& plan,
                                     std::size_t index,
                                     std::span<const double> values) {
  const Lump& lump = plan.schedule.lumps.at(index);
  LumpLinearization lin{{}, plan.ports.at(index)};
  const LumpPorts& ports = lin.ports;
  const Eigen::Index l = static_cast<Eigen::Index>(ports.killed.size());
  const Eigen::Index k = l + static_cast<Eigen::Index>(ports.kept.size());

  std::vector<Eigen::RowVectorXd> tangent(dag.num_values());
  for (Eigen::Index c = 0; c < l; ++c) {
    tangent[ports.killed[c]] = Eigen::RowVectorXd::Unit(k, c);
  }
  for (Eigen::Index c = l; c < k; ++c) {
    tangent[ports.kept[c - l]] = Eigen::RowVectorXd::Unit(k, c);
  }
  for (std::size_t p = lump.begin; p < lump.end; ++p) {
    const std::size_t node_index = plan.schedule.order[p];
    const DagNode& node = dag.node(node_index);
    std::array<double, 2> args{};
    for (std::size_t a = 0; a < node.inputs.size(); ++a) args[a] = values[node.inputs[a]];
    const std::span<const double> view(args.data(), node.inputs.size());
    if (!node.op->in_domain(view, node.literal)) {
      throw DomainError(node_index, node.op->name);
    }
    const auto partials = node.op->partials(view, node.literal);
    Eigen::RowVectorXd t = Eigen::RowVectorXd::Zero(k);
    for (std::size_t a = 0; a < node.inputs.size(); ++a) {
      t += partials[a] * tangent[node.inputs[a]];
    }
    tangent[dag.value_of(node_index)] = std::move(t);
  }

  lin.blocks.a.resize(l, l);
  lin.blocks.b.resize(l, k - l);
  for (Eigen::Index r = 0; r < l; ++r) {
    const Eigen::RowVectorXd& t = tangent[ports.produced[r]];
    lin.blocks.a.row(r) = t.head(l);
    lin.blocks.b.row(r) = t.tail(k - l);
  }
  return lin;
}

namespace {

Eigen::VectorXd gather(const State& w, const std::vector<SlotId>& slots) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(slots.size()));
  for (std::size_t i = 0; i < slots.size(); ++i) out[i] = w[slots[i].index];
  return out;
}

void scatter(State& w, const std::vector<SlotId>& slots, const Eigen::VectorXd& v) {
  for (std::size_t i = 0; i < slots.size(); ++i) w[slots[i].index] = v[i];
}

// Block form of the four step kernels: a -> A, b -> B, 1/a -> A^-1,
// -b/a -> -A^-1 B.
void apply_lump(Mode mode, const LumpLinearization& lin, State& w, double tol) {
  const auto& ports = lin.ports;
  const Eigen::VectorXd head = gather(w, ports.killed_slots);
  const Eigen::VectorXd tail = gather(w, ports.kept_slots);
  const auto& j = lin.blocks;
  switch (mode) {
    case Mode::Forward:
      scatter(w, ports.killed_slots, j.a * head + j.b * tail);
      break;
    case Mode::Reverse:
      scatter(w, ports.kept_slots, tail + j.b.transpose() * head);
      scatter(w, ports.killed_slots, j.a.transpose() * head);
      break;
    case Mode::ReverseInverse: {
      const auto inv = invert_lump(j, tol);
      scatter(w, ports.killed_slots, inv.a_inv * head + inv.neg_a_inv_b * tail);
      break;
    }
    case Mode::ForwardInverse: {
      const auto inv = invert_lump(j, tol);
      scatter(w, ports.kept_slots, tail + inv.neg_a_inv_b.transpose() * head);
      scatter(w, ports.killed_slots, inv.a_inv.transpose() * head);
      break;
    }
  }
}

}  // namespace

State lumped_mode_eval(const Dag& dag, const LumpPlan& plan, const State& x,
                       const State& v, Mode mode, const ModeOptions& opts) {
  const auto n = static_cast<Eigen::Index>(dag.num_inputs());
  if (x.size() != n || v.size() != n) {
    throw ValidationError("state and derivative vectors need " +
                          std::to_string(n) + " entries");
  }
  const auto values = evaluate_values(dag, x);
  const bool forward = runs_forward(mode);

  State w = State::Zero(n);
  if (forward) {
    w = v;
  } else {
    for (Eigen::Index j = 0; j < n; ++j) w[plan.output_slots[j].index] = v[j];
  }

  const std::size_t count = plan.schedule.lumps.size();
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t i = forward ? s : count - 1 - s;
    apply_lump(mode, lump_linearization(dag, plan, i, values), w,
               opts.singular_tol);
  }

  if (!forward) return w;
  State out(n);
  for (Eigen::Index j = 0; j < n; ++j) out[j] = w[plan.output_slots[j].index];
  return out;
}

State lumped_mode_eval(const Dag& dag, const State& x, const State& v,
                       Mode mode, const ModeOptions& opts) {
  return lumped_mode_eval(dag, plan_lumps(dag, greedy_schedule(dag)), x, v,
                          mode, opts);
}

}  // namespace invad

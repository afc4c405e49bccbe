#include "adtool/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "invad/lumpify.hpp"
#include "invad/newton.hpp"
#include "invad/ode.hpp"
#include "invad/oracle.hpp"
#include "invad/program_io.hpp"

namespace adtool {
namespace {

using json = nlohmann::ordered_json;
using invad::Dag;
using invad::Mode;
using invad::Program;
using invad::State;
using invad::Trace;

constexpr std::uint64_t kDefaultSeed = 42;

struct Options {
  std::string program;
  std::string field;
  std::vector<double> at;
  std::vector<double> vec;
  std::vector<double> dts;
  std::vector<double> reference;
  std::string mode = "primal";
  std::string objective = "size";
  double dt = 1e-3;
  double t0 = 0.0;
  double t1 = 1.0;
  double tol = invad::kDefaultSingularTol;
  double abs_tol = 1e-12;
  std::size_t max_iters = 50;
  std::size_t trials = 100;
  std::uint64_t seed = kDefaultSeed;
  bool csv = false;
  bool json_out = false;
  bool exact = false;
};

std::uint64_t default_seed() {
  if (const char* env = std::getenv("ADTOOL_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw invad::ValidationError("ADTOOL_SEED is not an unsigned integer");
    }
  }
  return kDefaultSeed;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw invad::ValidationError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

State to_state(const std::vector<double>& v) {
  return Eigen::Map<const State>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

void require_size(const std::vector<double>& v, std::size_t n, const char* flag) {
  if (v.size() != n) {
    throw invad::ValidationError(std::string(flag) + " needs " + std::to_string(n) +
                                 " value(s), got " + std::to_string(v.size()));
  }
}

// Scatters values given per slot in `slots` into a zero full-width state.
State scatter(const std::vector<double>& v, const std::vector<invad::SlotId>& slots,
              std::size_t width, const char* flag) {
  require_size(v, slots.size(), flag);
  State s = State::Zero(static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < slots.size(); ++i) s[slots[i].index] = v[i];
  return s;
}

State gather(const State& s, const std::vector<invad::SlotId>& slots) {
  State out(static_cast<Eigen::Index>(slots.size()));
  for (std::size_t i = 0; i < slots.size(); ++i) out[i] = s[slots[i].index];
  return out;
}

Mode parse_mode(const std::string& name) {
  if (name == "jvp") return Mode::Forward;
  if (name == "vjp") return Mode::Reverse;
  if (name == "jvp-inv") return Mode::ReverseInverse;
  if (name == "vjp-inv") return Mode::ForwardInverse;
  throw invad::ValidationError("unknown mode '" + name + "'");
}

void emit(std::ostream& out, const json& j) { out << j.dump() << '\n'; }

int cmd_eval(const Options& o, std::ostream& out) {
  const Program program = invad::parse_program(read_file(o.program));
  if (const auto* trace = std::get_if<Trace>(&program)) {
    const State x = scatter(o.at, trace->inputs(), trace->width(), "--at");
    emit(out, {{"result", to_json(gather(invad::run_primal(*trace, x), trace->outputs()))}});
  } else {
    const Dag& dag = std::get<Dag>(program);
    require_size(o.at, dag.num_inputs(), "--at");
    emit(out, {{"result", to_json(invad::evaluate_dag(dag, to_state(o.at)))}});
  }
  return 0;
}

int cmd_mode(Mode mode, const Options& o, std::ostream& out) {
  const Program program = invad::parse_program(read_file(o.program));
  const invad::ModeOptions opts{o.tol};
  if (const auto* trace = std::get_if<Trace>(&program)) {
    const State x = scatter(o.at, trace->inputs(), trace->width(), "--at");
    const bool fwd = invad::runs_forward(mode);
    const auto& from = fwd ? trace->inputs() : trace->outputs();
    const auto& to = fwd ? trace->outputs() : trace->inputs();
    const State v = scatter(o.vec, from, trace->width(), "--vec");
    emit(out, {{"result", to_json(gather(invad::evaluate_mode(mode, *trace, x, v, opts), to))}});
  } else {
    const Dag& dag = std::get<Dag>(program);
    require_size(o.at, dag.num_inputs(), "--at");
    require_size(o.vec, dag.num_inputs(), "--vec");
    emit(out, {{"result", to_json(invad::lumped_mode_eval(dag, to_state(o.at),
                                                          to_state(o.vec), mode, opts))}});
  }
  return 0;
}

invad::LumpObjective parse_objective(const std::string& name) {
  if (name == "size") return invad::LumpObjective::Size;
  if (name == "width") return invad::LumpObjective::Width;
  if (name == "lk") return invad::LumpObjective::LK;
  throw invad::ValidationError("unknown objective '" + name + "'");
}

json schedule_json(const invad::LumpSchedule& s, invad::LumpObjective objective) {
  json lumps = json::array();
  for (const auto& lump : s.lumps) {
    lumps.push_back({{"begin", lump.begin}, {"end", lump.end}, {"size", lump.size()},
                     {"width", lump.peak_width}, {"l", lump.l}, {"k", lump.k}});
  }
  const auto cost = invad::schedule_cost(s, objective);
  json c = json::array({cost.primary});
  if (objective == invad::LumpObjective::LK) c.push_back(cost.secondary);
  return {{"order", s.order}, {"cuts", s.cuts}, {"lumps", lumps}, {"cost", c}};
}

int cmd_lump(const Options& o, std::ostream& out) {
  const Program program = invad::parse_program(read_file(o.program));
  const Dag dag = std::holds_alternative<Dag>(program)
                      ? std::get<Dag>(program)
                      : invad::dag_from_trace(std::get<Trace>(program));
  const auto objective = parse_objective(o.objective);
  const auto greedy = invad::greedy_schedule(dag);
  json report = {{"n", dag.num_inputs()},
                 {"nodes", dag.num_nodes()},
                 {"objective", invad::objective_name(objective)},
                 {"greedy", schedule_json(greedy, objective)}};
  if (dag.num_nodes() <= invad::kBruteForceNodeLimit) {
    const auto best = invad::brute_force_schedule(dag, objective);
    report["brute_force"] = schedule_json(best, objective);
    report["greedy_optimal"] =
        invad::schedule_cost(greedy, objective) == invad::schedule_cost(best, objective);
  } else {
    report["brute_force"] = nullptr;
    report["greedy_optimal"] = nullptr;
  }
  emit(out, report);
  return 0;
}

int cmd_newton(const Options& o, std::ostream& out) {
  const Trace trace = invad::parse_trace(read_file(o.program));
  require_size(o.at, trace.width(), "--at");
  invad::NewtonConfig cfg;
  cfg.max_iters = o.max_iters;
  cfg.abs_tol = o.abs_tol;
  cfg.singular_tol = o.tol;
  const auto result = invad::newton_solve(trace, to_state(o.at), cfg);
  emit(out, {{"root", to_json(result.root)},
             {"iterations", result.iterations},
             {"residuals", result.residual_history}});
  return 0;
}

invad::OdeMode parse_ode_mode(const std::string& name) {
  using invad::OdeMode;
  for (OdeMode m : {OdeMode::Primal, OdeMode::Tangent, OdeMode::Cotangent,
                    OdeMode::ReverseInverse, OdeMode::ForwardInverse}) {
    if (name == invad::ode_mode_name(m)) return m;
  }
  throw invad::ValidationError("unknown ODE mode '" + name + "'");
}

int cmd_ode(const Options& o, std::ostream& out) {
  invad::VectorField field(invad::parse_trace(read_file(o.field)));
  const std::size_t n = field.dimension();
  const auto mode = parse_ode_mode(o.mode);
  State x0 = State::Zero(static_cast<Eigen::Index>(n));
  if (!o.at.empty()) {
    require_size(o.at, n, "--at");
    x0 = to_state(o.at);
  }
  State v = State::Zero(static_cast<Eigen::Index>(n));
  if (mode != invad::OdeMode::Primal || !o.vec.empty()) {
    require_size(o.vec, n, "--vec");
    v = to_state(o.vec);
  }
  invad::OdeProblem problem{std::move(field), o.t0, o.t1, o.dt, x0};
  const auto step = o.exact ? invad::InverseStep::ExactSolve : invad::InverseStep::FirstOrder;

  if (o.csv || !o.dts.empty()) {
    const std::vector<double> dts = o.dts.empty() ? std::vector<double>{o.dt} : o.dts;
    std::optional<State> reference;
    if (!o.reference.empty()) {
      require_size(o.reference, n, "--reference");
      reference = to_state(o.reference);
    }
    const auto rows = invad::convergence_report(problem, mode, dts, v, reference);
    if (o.csv) {
      out << "dt,error,order\n";
      for (const auto& row : rows) {
        out << invad::format_literal(row.dt) << ',' << invad::format_literal(row.error) << ',';
        if (row.order) out << invad::format_literal(*row.order);
        out << '\n';
      }
    } else {
      json table = json::array();
      for (const auto& row : rows) {
        table.push_back({{"dt", row.dt},
                         {"error", row.error},
                         {"order", row.order ? json(*row.order) : json(nullptr)}});
      }
      emit(out, {{"mode", o.mode}, {"convergence", table}});
    }
    return 0;
  }
  emit(out, {{"result", to_json(invad::run_ode_mode(problem, mode, v, step))}});
  return 0;
}

// Seeded evaluation point where the program is defined.
State sample_point(std::size_t n, std::uint64_t seed,
                   const std::function<void(const State&)>& probe) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.5, 2.0);
  for (int attempt = 0; attempt < 100; ++attempt) {
    State x(static_cast<Eigen::Index>(n));
    for (auto& xi : x) xi = dist(rng);
    try {
      probe(x);
      return x;
    } catch (const invad::DomainError&) {
    }
  }
  throw invad::ValidationError("no evaluation point in the program's domain found");
}

int cmd_check(const Options& o, std::ostream& out) {
  const Program program = invad::parse_program(read_file(o.program));
  invad::ModeReport report;
  json extra;
  State x;
  if (const auto* trace = std::get_if<Trace>(&program)) {
    x = o.at.empty() ? sample_point(trace->width(), o.seed,
                                    [&](const State& s) { invad::run_primal(*trace, s); })
                     : scatter(o.at, trace->inputs(), trace->width(), "--at");
    report = invad::compare_modes(*trace, x, o.trials, o.seed);
    const auto violation = invad::check_constant_width(*trace);
    extra["constant_width"] = !violation.has_value();
    if (violation) extra["width_violation"] = {{"cut", violation->cut}, {"width", violation->width}};
    extra["program"] = "trace";
  } else {
    const Dag& dag = std::get<Dag>(program);
    if (o.at.empty()) {
      x = sample_point(dag.num_inputs(), o.seed,
                       [&](const State& s) { invad::evaluate_dag(dag, s); });
    } else {
      require_size(o.at, dag.num_inputs(), "--at");
      x = to_state(o.at);
    }
    report = invad::compare_modes(dag, x, o.trials, o.seed);
    extra["program"] = "dag";
  }

  json errors;
  for (Mode m : {Mode::Forward, Mode::Reverse, Mode::ReverseInverse, Mode::ForwardInverse}) {
    if (invad::is_inverse(m) && !report.inverse_checked) {
      errors[invad::mode_name(m)] = nullptr;
    } else {
      errors[invad::mode_name(m)] = report.max_error[static_cast<std::size_t>(m)];
    }
  }
  json j = {{"program", extra["program"]},
            {"seed", report.seed},
            {"trials", report.trials},
            {"at", to_json(x)},
            {"passed", report.passed()},
            {"tolerance", invad::ModeReport::kModeTol},
            {"max_error", errors},
            {"dot_identity_error", report.dot_identity_error},
            {"starred_dot_identity_error", report.starred_dot_identity_error},
            {"composition_error", report.composition_error},
            {"singular_step", report.singular_step ? json(*report.singular_step) : json(nullptr)},
            {"oracle_singular", report.oracle_singular}};
  if (extra.contains("constant_width")) j["constant_width"] = extra["constant_width"];
  if (extra.contains("width_violation")) j["width_violation"] = extra["width_violation"];
  if (report.failure) j["failure"] = *report.failure;
  emit(out, j);
  return report.passed() ? 0 : 1;
}

json error_json(const std::exception& e) {
  json err = {{"kind", "Error"}, {"message", e.what()}};
  if (const auto* ie = dynamic_cast<const invad::Error*>(&e)) {
    err["kind"] = ie->kind();
    if (const auto* pe = dynamic_cast<const invad::ParseError*>(&e)) {
      err["line"] = pe->line();
      err["col"] = pe->col();
    } else if (const auto* se = dynamic_cast<const invad::SingularStepError*>(&e)) {
      err["step"] = se->step();
    } else if (const auto* de = dynamic_cast<const invad::DomainError*>(&e)) {
      if (de->step() != invad::kNoStep) err["step"] = de->step();
    }
  }
  return {{"error", err}};
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Forward, reverse and inverse-mode AD of straight-line programs"};
  app.name("adtool");
  app.require_subcommand(1);

  Options o;
  o.seed = default_seed();

  const auto add_program = [&](CLI::App* sub) {
    sub->add_option("program", o.program, "Program file")->required();
  };
  const auto add_at = [&](CLI::App* sub) {
    sub->add_option("--at", o.at, "Input values, comma separated")->delimiter(',');
  };
  const auto add_vec = [&](CLI::App* sub) {
    sub->add_option("--vec", o.vec, "Derivative vector, comma separated")->delimiter(',');
  };
  const auto add_format = [&](CLI::App* sub) {
    sub->add_flag("--json", o.json_out, "JSON output (default)");
  };

  auto* eval = app.add_subcommand("eval", "Evaluate the primal program");
  add_program(eval);
  add_at(eval);
  add_format(eval);

  struct ModeCommand {
    const char* name;
    const char* help;
    Mode mode;
  };
  std::vector<std::pair<CLI::App*, Mode>> mode_commands;
  for (const ModeCommand& mc :
       {ModeCommand{"jvp", "Jacobian-vector product", Mode::Forward},
        ModeCommand{"vjp", "Transposed Jacobian-vector product", Mode::Reverse},
        ModeCommand{"jvp-inv", "Inverse Jacobian-vector product", Mode::ReverseInverse},
        ModeCommand{"vjp-inv", "Inverse-transpose Jacobian-vector product",
                    Mode::ForwardInverse}}) {
    auto* sub = app.add_subcommand(mc.name, mc.help);
    add_program(sub);
    add_at(sub);
    add_vec(sub);
    add_format(sub);
    sub->add_option("--tol", o.tol, "Singular step tolerance on |a|");
    mode_commands.emplace_back(sub, mc.mode);
  }

  auto* lump = app.add_subcommand("lump", "Lumpify the program and compare schedules");
  add_program(lump);
  add_format(lump);
  lump->add_option("--objective", o.objective, "size | width | lk");

  auto* newton = app.add_subcommand("newton", "Newton root finding");
  add_program(newton);
  add_at(newton);
  add_format(newton);
  newton->add_option("--tol", o.abs_tol, "Residual tolerance");
  newton->add_option("--max-iters", o.max_iters, "Iteration limit");

  auto* ode = app.add_subcommand("ode", "Euler integration of an ODE and its AD modes");
  ode->add_option("--field", o.field, "Vector field program")->required();
  add_at(ode);
  add_vec(ode);
  ode->add_option("--t0", o.t0, "Start time");
  ode->add_option("--t1", o.t1, "End time");
  ode->add_option("--dt", o.dt, "Time step");
  ode->add_option("--mode", o.mode, "primal | jvp | vjp | jvp-inv | vjp-inv");
  ode->add_option("--dts", o.dts, "Step sizes for a convergence table")->delimiter(',');
  ode->add_option("--reference", o.reference, "Reference value for convergence errors")
      ->delimiter(',');
  ode->add_flag("--exact", o.exact, "Exact inverse steps instead of I - dt J");
  ode->add_flag("--csv", o.csv, "CSV convergence table");
  add_format(ode);

  auto* check = app.add_subcommand("check", "Compare all modes against the dense oracle");
  add_program(check);
  add_at(check);
  add_format(check);
  check->add_option("--trials", o.trials, "Random vectors per mode");
  check->add_option("--seed", o.seed, "Random seed (default $ADTOOL_SEED or 42)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (eval->parsed()) return cmd_eval(o, out);
    for (const auto& [sub, mode] : mode_commands) {
      if (sub->parsed()) return cmd_mode(mode, o, out);
    }
    if (lump->parsed()) return cmd_lump(o, out);
    if (newton->parsed()) return cmd_newton(o, out);
    if (ode->parsed()) return cmd_ode(o, out);
    if (check->parsed()) return cmd_check(o, out);
  } catch (const std::exception& e) {
    emit(out, error_json(e));
    return 1;
  }
  return 2;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace adtool

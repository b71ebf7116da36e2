// cohap: plan, inspect, execute and benchmark conditional assembly plans.
//
// Exit status: 0 success, 1 domain error (bad input file, unsolvable
// instance, failed validation), 2 usage error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "cohap/adl.hpp"
#include "cohap/assembly.hpp"
#include "cohap/executor.hpp"
#include "cohap/feasibility.hpp"
#include "cohap/grounder.hpp"
#include "cohap/planner.hpp"
#include "cohap/plantree.hpp"

using namespace cohap;

namespace {

// A failure already reported in domain terms; carries exit status 1.
struct DomainFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainFailure("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DomainFailure("cannot write " + path);
  out << text;
}

// Prefixes parse diagnostics with the file they came from.
template <class F>
auto parsing(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const adl::ParseError& e) {
    std::string where = path.empty() ? "<bundled>" : path;
    throw DomainFailure(where + (e.pos().line > 0 ? ":" : ": ") + e.what());
  }
}

// Inputs shared by plan, validate and exec. Empty paths fall back to the
// bundled assembly domain, the default instance and the canonical bench.
struct Inputs {
  std::string domain, instance, workspace;

  void add(CLI::App* sub) {
    sub->add_option("--domain", domain, "Action description (.adlh)")->check(CLI::ExistingFile);
    sub->add_option("--instance", instance, "Instance JSON")->check(CLI::ExistingFile);
    sub->add_option("--workspace", workspace, "Workspace JSON")->check(CLI::ExistingFile);
  }
  std::string domain_text() const { return domain.empty() ? assembly::domain_text() : slurp(domain); }
  std::string instance_text() const {
    return instance.empty() ? adl::instance_to_json(assembly::default_instance()) : slurp(instance);
  }
  std::string workspace_json() const {
    return workspace.empty() ? assembly::canonical_workspace().to_json() : slurp(workspace);
  }
};

// Grounded problem with everything it refers to kept alive.
struct Loaded {
  adl::DomainSpec dom;
  adl::InstanceSpec inst;
  std::shared_ptr<feas::FeasibilityOracle> fx;
  std::optional<ground::GroundProblem> g;
};

std::unique_ptr<Loaded> load(const Inputs& in, const plan::PlannerConfig& cfg) {
  auto l = std::make_unique<Loaded>();
  l->dom = parsing(in.domain, [&] { return adl::parse_domain(in.domain_text()); });
  l->inst = parsing(in.instance, [&] { return adl::parse_instance(in.instance_text(), l->dom); });
  auto ws = std::make_shared<const feas::Workspace>(feas::Workspace::from_json(in.workspace_json()));
  auto opt = cfg.ground_options();
  for (const auto& r : ws->regions())
    if (r.unsafe) opt.unsafe_regions.push_back(r.name);
  l->fx = feas::FeasibilityOracle::for_workspace(ws);
  l->g.emplace(ground::ground(l->dom, l->inst, *l->fx, opt));
  return l;
}

struct PlanFlags {
  int jobs = 1;
  int max_horizon = 30;
  std::size_t atom_budget = 2'000'000;
  std::vector<std::string> weights;  // label=N
  bool relaxed = false;

  void add(CLI::App* sub) {
    sub->add_option("--jobs,-j", jobs, "Planner workers")->check(CLI::Range(1, 256));
    sub->add_option("--max-horizon", max_horizon, "Longest branch considered")->check(CLI::Range(0, 1000));
    sub->add_option("--atom-budget", atom_budget, "Grounding size limit")->check(CLI::PositiveNumber);
    sub->add_option("--weight", weights, "Weak-constraint weight override, label=N");
    sub->add_flag("--relaxed-safety", relaxed, "Allow human-directed requests for dangerous parts");
  }

  plan::PlannerConfig config() const {
    plan::PlannerConfig cfg;
    cfg.workers = jobs;
    cfg.max_horizon = max_horizon;
    cfg.atom_budget = atom_budget;
    cfg.safety_strict = !relaxed;
    for (const auto& w : weights) {
      auto eq = w.find('=');
      int v = 0;
      try {
        if (eq == std::string::npos || eq == 0) throw std::invalid_argument(w);
        std::size_t used = 0;
        v = std::stoi(w.substr(eq + 1), &used);
        if (used != w.size() - eq - 1 || v < 0) throw std::invalid_argument(w);
      } catch (const std::exception&) {
        throw CLI::ValidationError("--weight", "expected label=N with N >= 0, got '" + w + "'");
      }
      cfg.weak_weights[w.substr(0, eq)] = v;
    }
    return cfg;
  }
};

// U, P and R recovered from the safety block: dangerous parts, parts placed
// human-only, parts placed robot-only.
std::tuple<int, int, int> upr(const tree::SafetyInfo& s) {
  int P = 0, R = 0;
  for (const auto& [part, region] : s.location) {
    if (region == "humanOnly") ++P;
    if (region == "robotOnly") ++R;
  }
  return {static_cast<int>(s.dangerous.size()), P, R};
}

std::string stats_row(const std::string& name, const tree::PlanTree& t) {
  auto [U, P, R] = upr(t.safety);
  auto row = tree::csv_row(name, U, P, R, tree::metrics(t), t.timings.value_or(tree::Timings{}));
  if (!t.timings) {
    row.erase(row.rfind(',', row.rfind(',') - 1));
    row += ",NA,NA";
  }
  return row;
}

constexpr const char* kCsvHeader = "inst,U,P,R,L,D,A,S,C,K,O,Cc,Rq,DN,BF,N,plan_s,checks_s";

tree::PlanTree read_tree(const std::string& path) { return tree::from_json(slurp(path)); }

// Answers on stdin, prompts on stderr.
class ConsoleProvider : public exec::OutcomeProvider {
 public:
  std::string choose(const exec::Query& q) override {
    std::cerr << q.prompt << "\n> " << std::flush;
    std::string line;
    if (!std::getline(std::cin, line)) throw exec::ExecError("disconnected", "stdin closed");
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    return line;
  }
};

std::pair<int, int> parse_range(const std::string& s) {
  auto dots = s.find("..");
  try {
    if (dots == std::string::npos) throw std::invalid_argument(s);
    std::size_t a_used = 0, b_used = 0;
    int a = std::stoi(s.substr(0, dots), &a_used);
    int b = std::stoi(s.substr(dots + 2), &b_used);
    if (a_used != dots || b_used != s.size() - dots - 2 || a < 0 || b < a) throw std::invalid_argument(s);
    return {a, b};
  } catch (const std::exception&) {
    throw CLI::ValidationError("--range", "expected a..b with 0 <= a <= b, got '" + s + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional planner for human-robot collaborative assembly"};
  app.require_subcommand(1);

  Inputs in;
  PlanFlags pf;

  auto* plan_cmd = app.add_subcommand("plan", "Compute a conditional plan tree");
  std::string plan_out;
  bool with_timings = false;
  in.add(plan_cmd);
  pf.add(plan_cmd);
  plan_cmd->add_option("--out,-o", plan_out, "Tree JSON destination (default stdout)");
  plan_cmd->add_flag("--with-timings", with_timings, "Include plan_s and checks_s in the tree JSON");

  auto* stats_cmd = app.add_subcommand("stats", "Print the metrics CSV row of a tree");
  std::string stats_tree, stats_name;
  stats_cmd->add_option("tree", stats_tree, "Tree JSON")->required()->check(CLI::ExistingFile);
  stats_cmd->add_option("--name", stats_name, "inst column (default: file stem)");

  auto* validate_cmd = app.add_subcommand("validate", "Replay a tree against its instance");
  std::string validate_tree;
  validate_cmd->add_option("tree", validate_tree, "Tree JSON")->required()->check(CLI::ExistingFile);
  in.add(validate_cmd);
  pf.add(validate_cmd);

  auto* dot_cmd = app.add_subcommand("export-dot", "Write a tree as Graphviz DOT");
  std::string dot_tree, dot_out;
  dot_cmd->add_option("tree", dot_tree, "Tree JSON")->required()->check(CLI::ExistingFile);
  dot_cmd->add_option("--out,-o", dot_out, "Destination (default stdout)");

  auto* exec_cmd = app.add_subcommand("exec", "Execute a tree against an outcome provider");
  std::string exec_tree, provider = "leftmost", script, listen, exec_log;
  std::uint32_t seed = 1;
  double timeout_s = 120;
  exec_cmd->add_option("tree", exec_tree, "Tree JSON")->required()->check(CLI::ExistingFile);
  in.add(exec_cmd);
  pf.add(exec_cmd);
  exec_cmd->add_option("--provider", provider, "Outcome source")
      ->check(CLI::IsMember({"scripted", "random", "leftmost", "interactive"}));
  exec_cmd->add_option("--seed", seed, "Seed for --provider random");
  exec_cmd->add_option("--script", script, "One outcome per line, for --provider scripted")
      ->check(CLI::ExistingFile);
  exec_cmd->add_option("--listen", listen, "Serve one wire session on host:port instead");
  exec_cmd->add_option("--timeout", timeout_s, "Seconds to wait for each wire answer")
      ->check(CLI::Range(0.001, 86400.0));
  exec_cmd->add_option("--log", exec_log, "JSON-lines log destination (default stdout)");

  auto* gen_cmd = app.add_subcommand("gen", "Generate a table-assembly instance");
  assembly::Params gp;
  std::optional<int> gen_parts;
  std::string gen_out;
  gen_cmd->add_option("--legs", gp.legs, "Legs")->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--feet", gp.feet, "Feet")->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--parts", gen_parts, "Movable parts, split into feet and legs")->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("-U", gp.U, "Dangerous parts")->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("-P", gp.P, "Parts only the human can reach")->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("-R", gp.R, "Parts only the robot can reach")->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--seed", gp.seed, "Generator seed");
  gen_cmd->add_option("--out,-o", gen_out, "Destination (default stdout)");

  auto* bench_cmd = app.add_subcommand("bench", "Sweep one instance axis and print metrics rows");
  std::string axis = "U", range = "2..6", bench_out;
  unsigned bench_seed = 1;
  int repeat = 3;
  bench_cmd->add_option("--axis", axis, "U, P or R")->check(CLI::IsMember({"U", "P", "R"}));
  bench_cmd->add_option("--range", range, "Inclusive a..b");
  bench_cmd->add_option("--seed", bench_seed, "Generator seed");
  bench_cmd->add_option("--repeat", repeat, "plan_s is the minimum of this many runs")->check(CLI::Range(1, 100));
  bench_cmd->add_option("--out,-o", bench_out, "CSV destination (default stdout)");
  pf.add(bench_cmd);

  auto* check_cmd = app.add_subcommand("check", "Evaluate one feasibility predicate");
  std::string check_name, check_ws;
  std::vector<std::string> check_args;
  check_cmd->add_option("predicate", check_name, "reachable or collision_free")->required();
  check_cmd->add_option("args", check_args, "Predicate arguments");
  check_cmd->add_option("--workspace", check_ws, "Workspace JSON")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);

    if (*plan_cmd) {
      auto cfg = pf.config();
      // Parse up front so diagnostics name the offending file.
      auto dom_text = in.domain_text();
      auto inst_text = in.instance_text();
      auto dom = parsing(in.domain, [&] { return adl::parse_domain(dom_text); });
      parsing(in.instance, [&] { return adl::parse_instance(inst_text, dom); });
      auto res = plan::solve(dom_text, inst_text, in.workspace_json(), cfg);
      if (!with_timings) res.tree.timings.reset();
      emit(plan_out, tree::to_json(res.tree) + "\n");
      if (!plan_out.empty() && plan_out != "-") {
        std::cout << kCsvHeader << "\n";
        res.tree.timings = res.timings;
        std::cout << stats_row(std::filesystem::path(plan_out).stem().string(), res.tree) << "\n";
      }
    } else if (*stats_cmd) {
      auto t = read_tree(stats_tree);
      auto name = stats_name.empty() ? std::filesystem::path(stats_tree).stem().string() : stats_name;
      std::cout << kCsvHeader << "\n" << stats_row(name, t) << "\n";
    } else if (*validate_cmd) {
      auto t = read_tree(validate_tree);
      auto l = load(in, pf.config());
      auto v = tree::check_structure(t);
      if (v.empty()) v = tree::replay_validate(t, *l->g);
      for (const auto& x : v) std::cout << "node " << x.node << ": " << x.code << ": " << x.message << "\n";
      if (!v.empty()) return 1;
      std::cout << "ok: " << t.nodes.size() << " nodes\n";
    } else if (*dot_cmd) {
      emit(dot_out, tree::to_dot(read_tree(dot_tree)));
    } else if (*exec_cmd) {
      auto t = read_tree(exec_tree);
      auto l = load(in, pf.config());
      std::ofstream log_file;
      std::ostream* log = &std::cout;
      if (!exec_log.empty() && exec_log != "-") {
        log_file.open(exec_log, std::ios::binary);
        if (!log_file) throw DomainFailure("cannot write " + exec_log);
        log = &log_file;
      }
      exec::ExecutionLog result;
      if (!listen.empty()) {
        auto [host, port] = exec::parse_listen(listen);
        exec::SessionServer server(host, port);
        std::cerr << "listening on " << host << ":" << server.port() << std::endl;
        exec::SessionOptions opt;
        opt.timeout = std::chrono::milliseconds(static_cast<long>(timeout_s * 1000));
        result = server.serve(t, *l->g, opt, log);
      } else {
        std::unique_ptr<exec::OutcomeProvider> p;
        if (provider == "scripted") {
          if (script.empty()) throw CLI::ValidationError("--script", "required with --provider scripted");
          std::vector<std::string> lines;
          std::istringstream ss(slurp(script));
          for (std::string line; std::getline(ss, line);)
            if (!line.empty()) lines.push_back(line);
          p = std::make_unique<exec::ScriptedProvider>(std::move(lines));
        } else if (provider == "random") {
          p = std::make_unique<exec::RandomProvider>(seed);
        } else if (provider == "interactive") {
          p = std::make_unique<ConsoleProvider>();
        } else {
          p = std::make_unique<exec::LeftmostProvider>();
        }
        result = exec::run(t, *l->g, *p, log);
      }
      std::cerr << "reached leaf via " << result.leaf_path() << "\n";
    } else if (*gen_cmd) {
      if (gen_parts) {
        gp = assembly::Params::with_parts(*gen_parts, gp.U, gp.P, gp.R, gp.seed);
      }
      emit(gen_out, adl::instance_to_json(assembly::generate_instance(gp)) + "\n");
    } else if (*bench_cmd) {
      auto [lo, hi] = parse_range(range);
      std::ofstream file;
      std::ostream* out = &std::cout;
      if (!bench_out.empty() && bench_out != "-") {
        file.open(bench_out, std::ios::binary);
        if (!file) throw DomainFailure("cannot write " + bench_out);
        out = &file;
      }
      *out << kCsvHeader << "\n" << std::flush;
      bool all_ok = true;
      assembly::bench_sweep(assembly::parse_axis(axis), lo, hi, pf.config(), bench_seed, repeat,
                            [&](const assembly::SweepRow& r) {
                              *out << r.csv() << "\n" << std::flush;
                              if (!r.solved) std::cerr << r.inst << ": " << r.error << "\n";
                              for (const auto& v : r.violations)
                                std::cerr << r.inst << ": node " << v.node << ": " << v.message << "\n";
                              all_ok = all_ok && r.solved && r.violations.empty();
                            });
      if (!all_ok) return 1;
    } else if (*check_cmd) {
      auto ws = std::make_shared<const feas::Workspace>(feas::Workspace::from_json(
          check_ws.empty() ? assembly::canonical_workspace().to_json() : slurp(check_ws)));
      auto fx = feas::FeasibilityOracle::for_workspace(ws);
      if (!fx->has(check_name)) throw feas::FeasibilityError("unknown predicate " + check_name);
      if (fx->arity(check_name) != static_cast<int>(check_args.size()))
        throw feas::FeasibilityError(check_name + " takes " + std::to_string(fx->arity(check_name)) +
                                     " arguments");
      std::cout << (fx->eval(check_name, check_args) ? "true" : "false") << "\n";
    }
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const exec::ExecError& e) {
    std::cerr << "error: " << e.code() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

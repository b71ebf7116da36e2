// Acceptance run: one PASS/FAIL line per criterion, then the sweep tables.
// Exit status 0 iff every criterion passes.

#include <chrono>
#include <climits>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "../tests/oracle.hpp"
#include "cohap/assembly.hpp"
#include "cohap/planner.hpp"

using namespace cohap;

namespace {

// Pinned thresholds.
constexpr int kMinMicroSolved = 10;
constexpr double kOracleBudgetS = 60.0;
constexpr int kMicroHorizon = 8;
constexpr int kSweepLo = 2, kSweepHi = 6;
constexpr int kMaxParts = 8;  // including top1
constexpr int kSweepHorizon = 30;
constexpr double kSweepBudgetS = 15 * 60.0;
constexpr int kRepeat = 3;  // plan_s is the minimum of this many runs
// Plan time may not drop along an axis by more than this. Zero: the minimum
// over repeats is compared as measured.
constexpr double kTimeSlackS = 0.0;

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Grounder {
  adl::DomainSpec dom = adl::parse_domain(assembly::domain_text());
  std::shared_ptr<const feas::Workspace> ws = std::make_shared<const feas::Workspace>(assembly::canonical_workspace());

  ground::GroundProblem ground(const adl::InstanceSpec& inst, const plan::PlannerConfig& cfg,
                               feas::FeasibilityOracle& fx) const {
    auto opt = cfg.ground_options();
    for (const auto& r : ws->regions())
      if (r.unsafe) opt.unsafe_regions.push_back(r.name);
    return ground::ground(dom, inst, fx, opt);
  }
};

// A solved instance kept for the cross-cutting checks.
struct Sample {
  std::string name;
  adl::InstanceSpec inst;
  plan::PlannerConfig cfg;
  tree::PlanTree tree;
  tree::Timings timings;
};

struct Verdict {
  bool pass = true;
  std::string detail;
  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

void report(const std::string& name, const Verdict& v, const std::string& summary) {
  std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << (v.pass ? summary : v.detail) << std::endl;
}

std::string fmt(double s) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << s << " s";
  return os.str();
}

bool is_human_directed(const std::string& action) {
  return action == "askHelp" || action == "requestToAttach" || action == "requestToUnhold" ||
         action == "confirmAttach";
}

int comm(const tree::Metrics& m) { return m.K + m.O + m.Cc + m.Rq; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  int jobs = 8;
  int hi = kSweepHi;
  app.add_option("--jobs", jobs, "Workers for the determinism comparison")->check(CLI::Range(2, 256));
  app.add_option("--sweep-hi", hi, "Last sweep point; below 6 is a partial run")->check(CLI::Range(kSweepLo, kSweepHi));
  CLI11_PARSE(app, argc, argv);

  Grounder gr;
  std::vector<Sample> samples;
  bool all = true;

  // Oracle equivalence on micro-instances.
  {
    Verdict v;
    int solved = 0, unsolved = 0;
    auto t0 = Clock::now();
    for (const auto& inst : oracle::micro_instances()) {
      plan::PlannerConfig cfg;
      cfg.max_horizon = kMicroHorizon;
      auto fx = feas::FeasibilityOracle::for_workspace(gr.ws);
      auto tp = Clock::now();
      auto g = gr.ground(inst, cfg, *fx);
      auto want = oracle::BruteForce(g, kMicroHorizon).run();
      try {
        auto t = plan::Planner(g, cfg).expand_tree();
        double plan_s = since(tp);
        if (!want.solved) {
          v.fail(inst.name + ": planner solved, brute force did not");
          continue;
        }
        if (oracle::branches(t, g) != want.branches) v.fail(inst.name + ": branches differ from brute force");
        samples.push_back({inst.name, inst, cfg, std::move(t), {plan_s, fx->check_stats().seconds}});
        ++solved;
      } catch (const plan::Unsolvable& e) {
        if (want.solved) v.fail(inst.name + ": brute force solved, planner reported " + e.what());
        ++unsolved;
      }
    }
    double dt = since(t0);
    if (solved < kMinMicroSolved)
      v.fail(std::to_string(solved) + " solved micro-instances, need " + std::to_string(kMinMicroSolved));
    if (dt >= kOracleBudgetS) v.fail("took " + fmt(dt));
    report("oracle-equivalence", v,
           std::to_string(solved) + " micro-instances match brute force horizon by horizon and cost by cost, " +
               std::to_string(unsolved) + " agree on unsolvability within " + std::to_string(kMicroHorizon) +
               ", " + fmt(dt));
    all = all && v.pass;
  }

  // Sweeps.
  const assembly::Axis axes[] = {assembly::Axis::U, assembly::Axis::P, assembly::Axis::R};
  const char* const axis_name[] = {"U", "P", "R"};
  std::vector<std::vector<assembly::SweepRow>> rows(3);
  double sweep_s[3] = {0, 0, 0};
  for (int a = 0; a < 3; ++a) {
    auto t0 = Clock::now();
    for (int k = kSweepLo; k <= hi; ++k) {
      auto p = assembly::sweep_params(axes[a], k, 1);
      plan::PlannerConfig cfg;
      cfg.max_horizon = kSweepHorizon;
      tree::PlanTree t;
      auto name = std::string(axis_name[a]) + std::to_string(k);
      rows[a].push_back(assembly::run_instance(name, p, cfg, kRepeat, &t));
      if (rows[a].back().solved) samples.push_back({name, assembly::generate_instance(p), cfg, std::move(t), rows[a].back().timings});
    }
    sweep_s[a] = since(t0);
  }
  {
    Verdict v;
    for (int a = 0; a < 3; ++a) {
      const auto& r = rows[a];
      std::string ax = axis_name[a];
      if (sweep_s[a] >= kSweepBudgetS) v.fail(ax + " sweep took " + fmt(sweep_s[a]));
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (!r[i].solved) {
          v.fail(r[i].inst + " unsolved: " + r[i].error);
          continue;
        }
        if (r[i].params.parts() + 1 > kMaxParts) v.fail(r[i].inst + " has more than 8 parts");
        if (i == 0 || !r[i - 1].solved) continue;
        const auto &m0 = r[i - 1].metrics, &m1 = r[i].metrics;
        if (m1.N < m0.N) v.fail(ax + ": N drops from " + r[i - 1].inst + " to " + r[i].inst);
        if (r[i].timings.plan_s + kTimeSlackS < r[i - 1].timings.plan_s)
          v.fail(ax + ": plan time drops from " + r[i - 1].inst + " to " + r[i].inst);
        if (a == 0 && m1.O < m0.O) v.fail("O drops from " + r[i - 1].inst + " to " + r[i].inst);
        if (a == 1 && m1.Rq < m0.Rq) v.fail("Rq drops from " + r[i - 1].inst + " to " + r[i].inst);
      }
    }
    long total[3] = {0, 0, 0};
    for (int a = 0; a < 3; ++a)
      for (const auto& r : rows[a])
        if (r.solved) total[a] += comm(r.metrics);
    for (std::size_t i = 0; i < rows[2].size(); ++i) {
      for (int a = 0; a < 2; ++a)
        if (i < rows[a].size() && rows[a][i].solved && rows[2][i].solved &&
            comm(rows[2][i].metrics) >= comm(rows[a][i].metrics))
          v.fail("communication at " + rows[2][i].inst + " is not below " + rows[a][i].inst);
    }
    if (total[2] >= total[0] || total[2] >= total[1]) v.fail("R sweep communication total not below U and P");
    std::ostringstream s;
    s << "N and plan time nondecreasing on U, P, R; O up in U; Rq up in P; communication totals U " << total[0]
      << ", P " << total[1] << ", R " << total[2] << "; sweeps " << fmt(sweep_s[0]) << ", " << fmt(sweep_s[1])
      << ", " << fmt(sweep_s[2]);
    if (hi < kSweepHi) v.fail("partial sweep, last point " + std::to_string(hi));
    report("trends", v, s.str());
    all = all && v.pass;
  }

  // Structure, safety and time split over every tree planned above.
  {
    Verdict structural, safety, split;
    int asks = 0, offers = 0;
    for (const auto& s : samples) {
      auto fx = feas::FeasibilityOracle::for_workspace(gr.ws);
      auto g = gr.ground(s.inst, s.cfg, *fx);
      auto bad = tree::check_structure(s.tree);
      if (bad.empty()) bad = tree::replay_validate(s.tree, g);
      for (const auto& x : bad) structural.fail(s.name + " node " + std::to_string(x.node) + ": " + x.message);

      for (const auto& n : s.tree.nodes) {
        if (n.kind == tree::NodeKind::Leaf) continue;
        if (is_human_directed(n.action) && g.static_holds("dangerous", {n.args[0]}))
          safety.fail(s.name + ": " + n.label() + " directs a dangerous part at the human");
        if (n.action == "offerHelp") ++offers;
        if (n.action == "askHelp") {
          ++asks;
          for (const auto& arm : g.members("manip"))
            if (!g.failure_holds("reachabilityFail", {arm, n.args[0]}, g.initial()))
              safety.fail(s.name + ": " + n.label() + " although " + arm + " reaches " + n.args[0]);
        }
      }
      if (!(s.timings.checks_s < s.timings.plan_s))
        split.fail(s.name + ": checks_s " + std::to_string(s.timings.checks_s) + " >= plan_s " +
                   std::to_string(s.timings.plan_s));
    }
    auto n = std::to_string(samples.size());
    report("structural", structural, "0 violations across " + n + " trees");
    report("safety", safety,
           "no dangerous part directed at the human in " + n + " trees; all " + std::to_string(asks) +
               " askHelp nodes follow reachabilityFail for every arm; " + std::to_string(offers) +
               " offerHelp nodes");
    report("time-split", split, "checks_s < plan_s on all " + n + " instances");
    all = all && structural.pass && safety.pass && split.pass;
  }

  // Determinism: serial against parallel expansion, byte for byte.
  {
    Verdict v;
    for (const auto& s : samples) {
      auto fx = feas::FeasibilityOracle::for_workspace(gr.ws);
      auto cfg = s.cfg;
      cfg.workers = jobs;
      auto g = gr.ground(s.inst, cfg, *fx);
      auto par = plan::Planner(g, cfg).expand_tree();
      auto serial = s.tree;
      serial.timings.reset();
      if (tree::to_json(par) != tree::to_json(serial)) v.fail(s.name + ": --jobs " + std::to_string(jobs) + " differs");
    }
    report("determinism", v,
           "serial and --jobs " + std::to_string(jobs) + " tree JSON identical on " + std::to_string(samples.size()) +
               " instances");
    all = all && v.pass;
  }

  std::cout << "\n# inst,U,P,R,L,D,A,S,C,K,O,Cc,Rq,DN,BF,N,plan_s,checks_s\n";
  for (const auto& r : rows)
    for (const auto& row : r) std::cout << "# " << row.csv() << "\n";
  return all ? 0 : 1;
}

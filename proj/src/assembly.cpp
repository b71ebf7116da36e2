#include "cohap/assembly.hpp"

#include <algorithm>
#include <chrono>
#include <random>

namespace cohap::assembly {

Params Params::with_parts(int n, int U, int P, int R, unsigned seed) {
  Params p;
  p.feet = n / 2;
  p.legs = n - p.feet;
  p.U = U;
  p.P = P;
  p.R = R;
  p.seed = seed;
  return p;
}

feas::Workspace canonical_workspace() {
  feas::Workspace w(0.05, 20, 10);
  for (int y = 0; y < 10; ++y) w.set_obstacle({13, y}, true);
  w.add_manipulator({"left", {3, 5}, 0.5});
  w.add_manipulator({"right", {9, 5}, 0.5});
  w.add_region({"robotOnly", 0, 0, 5, 9, false});
  w.add_region({"shared", 7, 0, 12, 9, false});
  w.add_region({"humanOnly", 15, 0, 19, 9, false});
  w.add_region({"hazard", 17, 7, 19, 9, true});
  return w;
}

adl::InstanceSpec generate_instance(const Params& p) {
  if (p.legs < 1 || p.feet < 0) throw ParamsError("need at least one leg and no negative counts");
  if (p.feet > p.legs) throw ParamsError("every foot needs its own leg");
  if (p.U < 0 || p.P < 0 || p.R < 0) throw ParamsError("U, P and R must be nonnegative");
  int n = p.parts();
  if (p.U > n) throw ParamsError("more dangerous parts (" + std::to_string(p.U) + ") than parts (" +
                                 std::to_string(n) + ")");
  if (p.U + p.P + p.R > n)
    throw ParamsError("U+P+R = " + std::to_string(p.U + p.P + p.R) + " exceeds the " +
                      std::to_string(n) + " movable parts");

  std::vector<std::string> legs, feet;
  for (int i = 1; i <= p.legs; ++i) legs.push_back("leg" + std::to_string(i));
  for (int i = 1; i <= p.feet; ++i) feet.push_back("foot" + std::to_string(i));

  // Hole shape of each leg; foot j takes the shape of leg j.
  static const char* const kShapes[] = {"Sq", "Tri", "Circ"};
  std::mt19937 rng(p.seed);
  std::vector<std::string> hole;
  for (int i = 0; i < p.legs; ++i) hole.push_back(kShapes[rng() % 3]);

  adl::InstanceSpec inst;
  inst.name = "table-l" + std::to_string(p.legs) + "f" + std::to_string(p.feet) + "-U" +
              std::to_string(p.U) + "P" + std::to_string(p.P) + "R" + std::to_string(p.R) + "-s" +
              std::to_string(p.seed);
  inst.workspace = kWorkspacePath;
  inst.params = {{"legs", p.legs}, {"feet", p.feet}, {"U", p.U},
                 {"P", p.P},       {"R", p.R},       {"seed", static_cast<int>(p.seed)}};

  auto& parts = inst.objects["part"];
  parts.push_back("top1");
  parts.insert(parts.end(), legs.begin(), legs.end());
  parts.insert(parts.end(), feet.begin(), feet.end());
  inst.objects["manip"] = {"left", "right"};
  inst.objects["region"] = {"robotOnly", "shared", "humanOnly", "hazard"};
  auto& conns = inst.objects["conn"];
  for (int i = 1; i <= p.legs; ++i) conns.push_back("c" + std::to_string(i));
  for (int i = 1; i <= p.feet; ++i) conns.push_back("f" + std::to_string(i));

  std::vector<std::string> shapes{"top"};
  auto add_shape = [&](const std::string& s) {
    if (std::find(shapes.begin(), shapes.end(), s) == shapes.end()) shapes.push_back(s);
  };
  auto& st = inst.statics;
  st["class"].push_back({"top", "top1"});
  for (int i = 0; i < p.legs; ++i) {
    add_shape("leg" + hole[i]);
    st["class"].push_back({"leg" + hole[i], legs[i]});
    st["fits"].push_back({legs[i], "top1", "c" + std::to_string(i + 1)});
    st["slot"].push_back({"top1", "c" + std::to_string(i + 1)});
  }
  for (int j = 0; j < p.feet; ++j) {
    add_shape("foot" + hole[j]);
    st["class"].push_back({"foot" + hole[j], feet[j]});
    st["fits"].push_back({feet[j], legs[j], "f" + std::to_string(j + 1)});
    st["slot"].push_back({legs[j], "f" + std::to_string(j + 1)});
  }
  inst.objects["shape"] = shapes;
  for (const auto& s : shapes) {
    if (s.rfind("leg", 0) == 0) st["attachable"].push_back({s, "top"});
    if (s.rfind("foot", 0) == 0) st["attachable"].push_back({s, "leg" + s.substr(4)});
  }

  // Dangerous: feet first, then legs.
  std::vector<std::string> order = feet;
  order.insert(order.end(), legs.begin(), legs.end());
  std::vector<std::string> rest;
  for (int i = 0; i < n; ++i) {
    if (i < p.U)
      st["dangerous"].push_back({order[i]});
    else
      rest.push_back(order[i]);
  }
  // Legs before feet for placement, in name order.
  std::stable_sort(rest.begin(), rest.end(), [](const std::string& a, const std::string& b) {
    return (a.rfind("leg", 0) == 0) > (b.rfind("leg", 0) == 0);
  });
  std::map<std::string, std::string> where;
  for (std::size_t i = 0; i < rest.size(); ++i) {
    int k = static_cast<int>(i);
    where[rest[i]] = k < p.R ? "robotOnly" : k < p.R + p.P ? "humanOnly" : "shared";
  }
  st["loc"].push_back({"top1", "shared"});
  for (const auto& part : parts)
    if (part != "top1") st["loc"].push_back({part, where.count(part) ? where[part] : "shared"});

  inst.init = {{"free", {"left"}, false}, {"free", {"right"}, false}, {"humanHoldingPart", {"top1"}, true}};
  for (const auto& part : parts)
    if (where.count(part) && where[part] == "robotOnly") inst.init.push_back({"humanHoldingPart", {part}, true});
  for (int i = 0; i < p.legs; ++i)
    inst.goal.push_back({"attached", {legs[i], "top1", "c" + std::to_string(i + 1)}, false});
  for (int j = 0; j < p.feet; ++j)
    inst.goal.push_back({"attached", {feet[j], legs[j], "f" + std::to_string(j + 1)}, false});
  return inst;
}

Axis parse_axis(const std::string& s) {
  if (s == "U") return Axis::U;
  if (s == "P") return Axis::P;
  if (s == "R") return Axis::R;
  throw ParamsError("axis must be U, P or R");
}

Params sweep_params(Axis axis, int k, unsigned seed) {
  return Params::with_parts(k + 1, axis == Axis::U ? k : 0, axis == Axis::P ? k : 0,
                            axis == Axis::R ? k : 0, seed);
}

std::string SweepRow::csv() const {
  if (solved) return tree::csv_row(inst, params.U, params.P, params.R, metrics, timings);
  std::string row = inst + "," + std::to_string(params.U) + "," + std::to_string(params.P) + "," +
                    std::to_string(params.R);
  for (int i = 0; i < 14; ++i) row += ",NA";
  return row;
}

SweepRow run_instance(const std::string& name, const Params& p, const plan::PlannerConfig& cfg, int repeat,
                      tree::PlanTree* out_tree) {
  SweepRow row;
  row.inst = name;
  row.params = p;
  auto dom = adl::parse_domain(domain_text());
  auto inst = generate_instance(p);
  auto ws = std::make_shared<const feas::Workspace>(canonical_workspace());
  auto opt = cfg.ground_options();
  for (const auto& r : ws->regions())
    if (r.unsafe) opt.unsafe_regions.push_back(r.name);

  std::optional<tree::PlanTree> best;
  for (int rep = 0; rep < std::max(1, repeat); ++rep) {
    auto fx = feas::FeasibilityOracle::for_workspace(ws);
    auto t0 = std::chrono::steady_clock::now();
    try {
      auto g = ground::ground(dom, inst, *fx, opt);
      plan::Planner planner(g, cfg);
      auto t = planner.expand_tree();
      double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (!best || dt < row.timings.plan_s) {
        row.timings = {dt, fx->check_stats().seconds};
        if (!best) row.violations = tree::replay_validate(t, g);
        best = std::move(t);
      }
    } catch (const plan::Unsolvable& e) {
      row.error = e.what();
      return row;
    }
  }
  row.solved = true;
  best->timings = row.timings;
  row.metrics = tree::metrics(*best);
  if (out_tree) *out_tree = std::move(*best);
  return row;
}

std::vector<SweepRow> bench_sweep(Axis axis, int lo, int hi, const plan::PlannerConfig& cfg, unsigned seed,
                                  int repeat, const std::function<void(const SweepRow&)>& on_row) {
  static const char* const kName[] = {"U", "P", "R"};
  std::vector<SweepRow> rows;
  for (int k = lo; k <= hi; ++k) {
    auto p = sweep_params(axis, k, seed);
    rows.push_back(run_instance(std::string(kName[static_cast<int>(axis)]) + std::to_string(k), p, cfg, repeat));
    if (on_row) on_row(rows.back());
  }
  return rows;
}

}  // namespace cohap::assembly

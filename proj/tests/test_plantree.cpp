#include <functional>
#include <random>
#include <set>

#include "doctest.h"
#include "fixture.hpp"
#include "cohap/planner.hpp"
#include "cohap/plantree.hpp"
#include "json.hpp"

using namespace cohap;
using tree::Edge;
using tree::Node;
using tree::NodeKind;
using tree::PlanTree;

namespace {

int add(PlanTree& t, NodeKind k, std::string action, std::vector<std::string> args = {}) {
  int id = static_cast<int>(t.nodes.size());
  t.nodes.push_back({id, k, std::move(action), std::move(args), 0, {}});
  return id;
}

void link(PlanTree& t, int from, int to, std::optional<std::string> outcome = std::nullopt) {
  t.nodes[from].children.push_back({std::move(outcome), to});
}

// sense --yes--> hold -> goal
//       --no---> askHelp --accept--> requestToAttach -> goal
//                        --decline-> goal
PlanTree small_tree() {
  PlanTree t;
  int s = add(t, NodeKind::Sensing, "senseHumanHolding");
  int h = add(t, NodeKind::Actuation, "hold", {"left", "leg1"});
  int g1 = add(t, NodeKind::Leaf, "");
  int k = add(t, NodeKind::CommNondet, "askHelp", {"leg1", "top1", "c1"});
  int r = add(t, NodeKind::CommDet, "requestToAttach", {"leg1", "top1", "c1"});
  int g2 = add(t, NodeKind::Leaf, "");
  int g3 = add(t, NodeKind::Leaf, "");
  link(t, s, h, "yes");
  link(t, h, g1);
  link(t, s, k, "no");
  link(t, k, r, "accept");
  link(t, r, g2);
  link(t, k, g3, "decline");
  t.root = s;
  return tree::renumber(t);
}

plan::SolveResult solve_baseline(int workers = 1) {
  plan::PlannerConfig cfg;
  cfg.workers = workers;
  return plan::solve(testutil::slurp("data/assembly.adlh"), testutil::slurp("tests/fixtures/baseline.json"),
                     testutil::slurp("data/bench.json"), cfg);
}

bool has_code(const std::vector<tree::Violation>& v, const std::string& code) {
  for (const auto& x : v)
    if (x.code == code) return true;
  return false;
}

// Random well-formed tree: every decision node gets 2..3 distinct labels.
PlanTree random_tree(std::mt19937& rng, int max_nodes) {
  PlanTree t;
  static const NodeKind kinds[] = {NodeKind::Actuation, NodeKind::Sensing, NodeKind::CommDet,
                                   NodeKind::CommNondet};
  std::function<int(int)> grow = [&](int depth) -> int {
    bool stop = depth > 6 || static_cast<int>(t.nodes.size()) >= max_nodes || rng() % 4 == 0;
    if (stop) return add(t, NodeKind::Leaf, "");
    auto k = kinds[rng() % 4];
    int id = add(t, k, "a" + std::to_string(rng() % 5), {"x" + std::to_string(rng() % 3)});
    int n = tree::is_decision(k) ? 2 + static_cast<int>(rng() % 2) : 1;
    for (int i = 0; i < n; ++i) {
      int c = grow(depth + 1);
      link(t, id, c, tree::is_decision(k) ? std::optional<std::string>("o" + std::to_string(i)) : std::nullopt);
    }
    return id;
  };
  t.root = grow(0);
  return tree::renumber(t);
}

}  // namespace

TEST_CASE("metrics of a hand-built tree") {
  auto t = small_tree();
  CHECK(tree::check_structure(t).empty());
  auto m = tree::metrics(t);
  CHECK(m.N == 7);
  CHECK(m.L == 3);
  CHECK(m.DN == 2);
  CHECK(m.BF == 2);
  // Longest branch: sense, askHelp, requestToAttach.
  CHECK(m.D == 3);
  CHECK(m.A == 0);
  CHECK(m.S == 1);
  CHECK(m.C == 2);
  CHECK(m.K == 1);
  CHECK(m.O == 0);
  CHECK(m.Cc == 0);
  CHECK(m.Rq == 1);
}

TEST_CASE("longest-branch ties go to the first child") {
  PlanTree t;
  int s = add(t, NodeKind::Sensing, "senseHumanHolding");
  int a = add(t, NodeKind::Actuation, "hold", {"left", "leg1"});
  int c = add(t, NodeKind::CommDet, "requestToUnhold", {"leg1"});
  int g1 = add(t, NodeKind::Leaf, "");
  int g2 = add(t, NodeKind::Leaf, "");
  link(t, s, a, "yes");
  link(t, s, c, "no");
  link(t, a, g1);
  link(t, c, g2);
  t.root = s;
  auto m = tree::metrics(tree::renumber(t));
  CHECK(m.D == 2);
  CHECK(m.A == 1);
  CHECK(m.C == 0);
  CHECK(m.Rq == 1);
}

TEST_CASE("planned table tree: metrics and replay") {
  auto r = solve_baseline();
  // Checked by hand against the printed tree; the longest branch is
  // hold, attach, askHelp/decline, sense/unholding, hold, attach,
  // sense/holding, confirmAttach/no, requestToUnhold, hold, attach.
  tree::Metrics want{6, 11, 6, 2, 3, 1, 1, 1, 3, 5, 2, 30};
  CHECK(r.metrics == want);
  CHECK(tree::metrics(r.tree) == want);
  testutil::Baseline f;
  auto g = f.ground();
  CHECK(tree::replay_validate(r.tree, g).empty());
  CHECK(r.tree.safety.dangerous == std::vector<std::string>{"foot1"});
  CHECK(r.tree.safety.location.at("leg2") == "humanOnly");
  CHECK(r.timings.checks_s <= r.timings.plan_s);

  const auto& root = r.tree.node(r.tree.root);
  CHECK(root.label() == "hold(left,leg1)");
  CHECK(r.tree.node(2).label() == "askHelp(leg2,top1,c2)");
}

TEST_CASE("replay catches corrupted trees") {
  testutil::Baseline f;
  auto g = f.ground();
  auto base = solve_baseline().tree;

  auto t = base;
  t.nodes[2].children[1].outcome = "maybe";
  auto v = tree::replay_validate(t, g);
  REQUIRE(v.size() == 1);
  CHECK(v[0].code == "outcome-mismatch");
  CHECK(v[0].node == 2);

  t = base;
  t.nodes[0].args = {"left", "nothing"};
  CHECK(has_code(tree::replay_validate(t, g), "unknown-action"));

  t = base;
  t.nodes[0].kind = NodeKind::CommDet;
  CHECK(has_code(tree::replay_validate(t, g), "kind"));

  // Attaching before holding.
  t = base;
  std::swap(t.nodes[0].action, t.nodes[1].action);
  std::swap(t.nodes[0].args, t.nodes[1].args);
  CHECK(has_code(tree::replay_validate(t, g), "precondition"));

  // Cut a branch short: the leaf comes before the goal holds.
  t = base;
  t.nodes[0].children[0].child = static_cast<int>(t.nodes.size());
  t.nodes.push_back({static_cast<int>(t.nodes.size()), NodeKind::Leaf, "", {}, 1, {}});
  auto cut = tree::renumber(t);
  CHECK(has_code(tree::replay_validate(cut, g), "goal"));

  t = base;
  t.nodes[3].children.push_back(t.nodes[3].children[0]);
  CHECK(has_code(tree::replay_validate(t, g), "children"));
}

TEST_CASE("structure checks") {
  auto t = small_tree();
  auto twice = t;
  twice.nodes[1].children[0].child = 3;  // node 3 now has two parents
  CHECK(has_code(tree::check_structure(twice), "structure"));

  auto unlabeled = t;
  unlabeled.nodes[0].children[0].outcome.reset();
  CHECK(has_code(tree::check_structure(unlabeled), "structure"));

  auto dup = t;
  dup.nodes[0].children[1].outcome = "yes";
  CHECK(has_code(tree::check_structure(dup), "structure"));

  auto labeled = t;
  labeled.nodes[1].children[0].outcome = "x";
  CHECK(has_code(tree::check_structure(labeled), "structure"));

  PlanTree empty;
  CHECK(has_code(tree::check_structure(empty), "structure"));
}

TEST_CASE("json round trip") {
  auto r = solve_baseline();
  auto t = r.tree;
  REQUIRE(t.timings);
  t.timings.reset();
  auto text = tree::to_json(t);
  CHECK(text.find("\"timings\"") == std::string::npos);
  auto back = tree::from_json(text);
  CHECK(back == t);
  CHECK(tree::to_json(back) == text);
  CHECK(!back.timings);

  t.timings = tree::Timings{1.5, 0.25};
  auto timed = tree::from_json(tree::to_json(t));
  REQUIRE(timed.timings);
  CHECK(timed.timings->plan_s == 1.5);
  CHECK(timed.timings->checks_s == 0.25);

  auto j = nlohmann::json::parse(text);
  CHECK(j["version"] == 1);
  CHECK(j["metrics"]["N"] == 30);
  CHECK(j["nodes"][2]["kind"] == "commNondet");
  CHECK(j["nodes"][2]["children"][0]["outcome"] == "accept");
  CHECK(j["nodes"][0]["children"][0]["outcome"].is_null());
  CHECK(j["safety"]["unsafeRegions"] == nlohmann::json::array({"hazard"}));
}

TEST_CASE("json rejects malformed trees") {
  CHECK_THROWS_AS(tree::from_json("{"), tree::TreeError);
  CHECK_THROWS_AS(tree::from_json(R"({"version": 2, "root": 0, "nodes": []})"), tree::TreeError);
  CHECK_THROWS_WITH_AS(tree::from_json(R"({"version": 1, "root": 0, "nodes": []})"),
                       doctest::Contains("no nodes"), tree::TreeError);
  CHECK_THROWS_WITH_AS(tree::from_json(R"({"version": 1, "nodes": [{"id": 0, "kind": "leaf"}]})"),
                       doctest::Contains("no root"), tree::TreeError);
  CHECK_THROWS_WITH_AS(
      tree::from_json(R"({"version": 1, "root": 0, "nodes": [{"id": 0, "kind": "dance"}]})"),
      doctest::Contains("dance"), tree::TreeError);
  // A sensing node needs two children.
  CHECK_THROWS_AS(tree::from_json(R"({"version": 1, "root": 0, "nodes": [
      {"id": 0, "kind": "sensing", "action": "look", "children": [{"id": 1, "outcome": "a"}]},
      {"id": 1, "kind": "leaf"}]})"),
                  tree::TreeError);
  auto ok = tree::from_json(R"({"version": 1, "root": 0, "nodes": [{"id": 0, "kind": "leaf"}]})");
  CHECK(tree::metrics(ok).L == 1);
}

TEST_CASE("dot export") {
  auto dot = tree::to_dot(small_tree());
  CHECK(dot.rfind("digraph plan {", 0) == 0);
  auto count = [&](const std::string& s) {
    int n = 0;
    for (auto p = dot.find(s); p != std::string::npos; p = dot.find(s, p + 1)) ++n;
    return n;
  };
  CHECK(count("[label=\"yes\"]") == 1);
  CHECK(count("[label=\"no\"]") == 1);
  CHECK(count(" -> ") == 6);
  CHECK(count("doublecircle") == 3);
  CHECK(count("color=blue") == 1);
  CHECK(dot.find("n3 [label=\"askHelp(leg1,top1,c1)\"") != std::string::npos);
}

TEST_CASE("renumber yields preorder and drops unreachable nodes") {
  PlanTree t;
  int g = add(t, NodeKind::Leaf, "");
  int stray = add(t, NodeKind::Leaf, "");
  int h = add(t, NodeKind::Actuation, "hold", {"left", "leg1"});
  link(t, h, g);
  t.root = h;
  (void)stray;
  auto r = tree::renumber(t);
  REQUIRE(r.nodes.size() == 2);
  CHECK(r.root == 0);
  CHECK(r.nodes[0].action == "hold");
  CHECK(r.nodes[1].depth == 1);
  CHECK(r.nodes[0].children[0].child == 1);
}

TEST_CASE("csv rows") {
  tree::Metrics m{6, 11, 6, 2, 3, 1, 1, 1, 3, 5, 2, 30};
  CHECK(std::string(tree::kCsvHeader) == "inst,U,P,R,L,D,A,S,C,K,O,Cc,Rq,DN,BF,N,plan_s,checks_s");
  CHECK(tree::csv_row("base", 1, 1, 1, m, {0.01234, 0.5}) == "base,1,1,1,6,11,6,2,3,1,1,1,3,5,2,30,0.0123,0.5000");
}

TEST_CASE("random trees: structural invariants") {
  std::mt19937 rng(7);
  for (int i = 0; i < 500; ++i) {
    auto t = random_tree(rng, 40);
    CAPTURE(i);
    REQUIRE(tree::check_structure(t).empty());
    auto m = tree::metrics(t);
    int leaves = 0, decisions = 0, deepest = 0;
    for (const auto& n : t.nodes) {
      leaves += n.kind == NodeKind::Leaf;
      decisions += tree::is_decision(n.kind);
      if (n.kind == NodeKind::Leaf) deepest = std::max(deepest, n.depth);
      for (const auto& e : n.children) CHECK(e.child > n.id);
    }
    CHECK(m.N == static_cast<int>(t.nodes.size()));
    CHECK(m.L == leaves);
    CHECK(m.DN == decisions);
    CHECK(m.D == deepest);
    CHECK(m.A + m.S + m.C == m.D);
    // Every decision node adds at least one leaf.
    CHECK(m.L >= m.DN + 1);
    CHECK(tree::from_json(tree::to_json(t)) == t);
    CHECK(tree::renumber(t) == t);
  }
}

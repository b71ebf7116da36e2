#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"
#include "fixture.hpp"

using namespace cohap;
using ground::BeliefState;
using ground::DomainError;
using ground::GroundProblem;
using ground::Truth;

namespace {

bool applicable(const GroundProblem& g, const BeliefState& s, const std::string& name,
                const std::vector<std::string>& args) {
  auto id = g.find_action(name, args);
  REQUIRE(id);
  auto app = g.applicable(s);
  return std::find(app.begin(), app.end(), *id) != app.end();
}

GroundProblem ground_text(const std::string& domain, const std::string& instance) {
  feas::FeasibilityOracle fx;
  auto dom = adl::parse_domain(domain);
  return ground::ground(dom, adl::parse_instance(instance, dom), fx);
}

}  // namespace

TEST_CASE("belief state encodes three truth values") {
  BeliefState s(130);
  CHECK(s.get(129) == Truth::Unknown);
  s.set(129, Truth::True);
  CHECK(s.is_true(129));
  s.set(129, Truth::False);
  CHECK(s.is_false(129));
  CHECK(!s.is_true(129));
  s.set(129, Truth::Unknown);
  CHECK(s == BeliefState(130));
  CHECK(s.hash() == BeliefState(130).hash());
  BeliefState t = s;
  t.step = 7;
  CHECK(t == s);
}

TEST_CASE("grounding the table instance") {
  testutil::Baseline f;
  auto g = f.ground();

  int holds = 0;
  for (const auto& a : g.actions()) holds += a.name == "hold";
  CHECK(holds == 8);
  // Schema order, then lexicographic arguments.
  CHECK(g.action(0).to_string() == "hold(left,foot1)");
  CHECK(g.stats().atoms == g.atom_count());

  // leg2 lies behind the wall for both arms.
  const auto& s0 = g.initial();
  CHECK(g.failure_holds("reachabilityFail", {"left", "leg2"}, s0));
  CHECK(g.failure_holds("reachabilityFail", {"right", "leg2"}, s0));
  CHECK(!g.failure_holds("reachabilityFail", {"left", "leg1"}, s0));

  // Every oracle query is distinct; the grounder memoises the rest.
  auto st = f.fx->check_stats();
  CHECK(st.calls == g.stats().external_calls);
  CHECK(st.hits == 0);
  CHECK(st.calls <= 2 * 4);

  CHECK(s0.is_false(g.atom("attached(leg1,top1,c1)")));
  CHECK(s0.get(g.atom("humanHolding")) == Truth::Unknown);
  CHECK(!g.goal_reached(s0));
}

TEST_CASE("initial applicability follows the domain rules") {
  testutil::Baseline f;
  auto g = f.ground();
  const auto& s0 = g.initial();

  CHECK(applicable(g, s0, "hold", {"left", "leg1"}));
  CHECK(applicable(g, s0, "hold", {"right", "top1"}));
  // Unknown whether the human holds them.
  CHECK(!applicable(g, s0, "hold", {"left", "leg2"}));
  CHECK(!applicable(g, s0, "hold", {"left", "foot1"}));
  CHECK(applicable(g, s0, "senseHumanHolding", {}));
  CHECK(!applicable(g, s0, "senseHumanHoldingWhichPart", {}));
  CHECK(applicable(g, s0, "senseHumanUnholding", {"leg2"}));
  CHECK(!applicable(g, s0, "senseHumanUnholding", {"leg1"}));

  CHECK(applicable(g, s0, "askHelp", {"leg2", "top1", "c2"}));
  CHECK(!applicable(g, s0, "askHelp", {"leg1", "top1", "c1"}));   // reachable
  CHECK(!applicable(g, s0, "askHelp", {"foot1", "leg1", "f1"}));  // dangerous
  CHECK(g.action(*g.find_action("askHelp", {"leg1", "top1", "c2"})).dead);  // does not fit

  auto s = s0;
  s.set(g.atom("free(left)"), Truth::False);
  CHECK(!applicable(g, s, "hold", {"left", "leg1"}));
  CHECK(applicable(g, s, "hold", {"right", "leg1"}));

  s.set(g.atom("humanHolding"), Truth::True);
  CHECK(!applicable(g, s, "senseHumanHolding", {}));
  CHECK(!applicable(g, s, "askHelp", {"leg2", "top1", "c2"}));
  CHECK(applicable(g, s, "senseHumanHoldingWhichPart", {}));
}

TEST_CASE("ranged outcomes drop inconsistent alternatives") {
  testutil::Baseline f;
  auto g = f.ground();
  auto s = g.initial();
  s.set(g.atom("humanHolding"), Truth::True);
  const auto& a = g.action(*g.find_action("senseHumanHoldingWhichPart", {}));
  REQUIRE(a.outcomes.size() == 4);
  auto ok = g.consistent_outcomes(s, a);
  REQUIRE(ok.size() == 2);
  CHECK(a.outcomes[ok[0]].label == "leg2");
  CHECK(a.outcomes[ok[1]].label == "foot1");

  auto t = g.successor(s, a, ok[1]);
  CHECK(t.is_true(g.atom("humanHoldingPart(foot1)")));
  CHECK(t.is_false(g.atom("humanHoldingPart(leg2)")));
  CHECK(t.step == s.step + 1);

  const auto& w = g.action(*g.find_action("senseHumanAttachingWhere", {"leg2", "top1"}));
  CHECK(w.outcomes.size() == 2);  // slots c1 and c2 of top1
}

TEST_CASE("effects on fully observable fluents are not observations") {
  testutil::Baseline f;
  auto g = f.ground();
  auto s = g.initial();
  s.set(g.atom("humanHolding"), Truth::True);
  s.set(g.atom("humanHoldingPart(foot1)"), Truth::True);
  const auto& a = g.action(*g.find_action("offerHelp", {"foot1", "leg1", "f1"}));
  CHECK(g.consistent_outcomes(s, a).size() == 2);
  auto t = g.successor(s, a, 1);
  CHECK(t.is_true(g.atom("attached(foot1,leg1,f1)")));
  CHECK(t.is_false(g.atom("humanHolding")));
}

TEST_CASE("hard state constraints reject successors") {
  testutil::Baseline f;
  auto g = f.ground();
  auto s = g.initial();
  s.set(g.atom("humanHoldingPart(leg2)"), Truth::True);
  const auto& a = g.action(*g.find_action("attach", {"left", "leg1", "top1", "c1"}));
  auto bad = s;
  bad.set(g.atom("holding(left,leg2)"), Truth::True);
  CHECK_THROWS_AS(g.successor(bad, a, std::nullopt), DomainError);
  CHECK_NOTHROW(g.successor(s, a, std::nullopt));
}

TEST_CASE("weak costs") {
  testutil::Baseline f;
  auto g = f.ground();
  const auto& s0 = g.initial();
  auto cost = [&](const std::string& n, const std::vector<std::string>& args) {
    return g.step_cost(s0, g.action(*g.find_action(n, args))).to_string();
  };
  CHECK(cost("hold", {"left", "leg1"}) == "0");
  CHECK(cost("hold", {"left", "leg2"}) == "2@1");
  CHECK(cost("senseHumanHolding", {}) == "2@2");
  CHECK(cost("askHelp", {"leg2", "top1", "c2"}) == "1@1");

  ground::GroundOptions opt;
  opt.weak_weights["sensing"] = 5;
  testutil::Baseline f2;
  auto g2 = f2.ground(opt);
  CHECK(g2.step_cost(g2.initial(), g2.action(*g2.find_action("senseHumanHolding", {}))).to_string() ==
        "5@2");
}

TEST_CASE("relaxed safety turns safety constraints into penalties") {
  testutil::Baseline f;
  ground::GroundOptions opt;
  opt.safety_strict = false;
  auto g = f.ground(opt);
  auto s = g.initial();
  s.set(g.atom("humanHolding"), Truth::True);
  s.set(g.atom("humanHoldingPart(foot1)"), Truth::True);
  CHECK(applicable(g, s, "requestToUnhold", {"foot1"}));
  CHECK(g.step_cost(s, g.action(*g.find_action("requestToUnhold", {"foot1"}))).to_string() == "1@3");

  testutil::Baseline f2;
  auto strict = f2.ground();
  CHECK(!applicable(strict, s, "requestToUnhold", {"foot1"}));
}

TEST_CASE("unsafe regions from the workspace block asking for help") {
  testutil::Baseline f;
  f.inst.statics["loc"][2] = {"leg2", "hazard"};
  auto free = f.ground();
  CHECK(applicable(free, free.initial(), "askHelp", {"leg2", "top1", "c2"}));

  testutil::Baseline f2;
  f2.inst.statics["loc"][2] = {"leg2", "hazard"};
  ground::GroundOptions opt;
  opt.unsafe_regions = {"hazard"};
  auto g = f2.ground(opt);
  CHECK(!applicable(g, g.initial(), "askHelp", {"leg2", "top1", "c2"}));
}

TEST_CASE("count tests and default negation on unknown atoms") {
  const std::string dom = R"(
sort s.
fluent g(s) partial.
fluent done.
actuation none_known
  pre {g(X) : s(X)} = 0;
  effect done;
actuation two_known
  pre {g(X) : s(X)} >= 2;
  effect done;
actuation not_g(x:s)
  pre not g(x);
  effect done;
)";
  auto g = ground_text(dom, R"({"objects": {"s": ["a", "b", "c"]}, "init": [], "goal": ["done"]})");
  auto s = g.initial();
  CHECK(applicable(g, s, "none_known", {}));
  CHECK(!applicable(g, s, "two_known", {}));
  CHECK(applicable(g, s, "not_g", {"a"}));
  s.set(g.atom("g(a)"), Truth::True);
  CHECK(!applicable(g, s, "none_known", {}));
  CHECK(!applicable(g, s, "not_g", {"a"}));
  s.set(g.atom("g(b)"), Truth::False);
  CHECK(!applicable(g, s, "two_known", {}));
  CHECK(applicable(g, s, "not_g", {"b"}));
  s.set(g.atom("g(c)"), Truth::True);
  CHECK(applicable(g, s, "two_known", {}));
}

TEST_CASE("degenerate domains") {
  auto g = ground_text("sort s.\nfluent f.\n", R"({"objects": {"s": ["a"]}, "init": ["f"], "goal": ["f"]})");
  CHECK(g.actions().empty());
  CHECK(g.applicable(g.initial()).empty());
  CHECK(g.goal_reached(g.initial()));

  // Sensing a fluent that is already known offers a single outcome.
  auto k = ground_text(R"(
fluent p partial.
sensing look
  outcome yes: p;
  outcome no: -p;
)",
                       R"({"init": ["p"], "goal": ["p"]})");
  CHECK(k.applicable(k.initial()).empty());
}

TEST_CASE("grounding errors") {
  testutil::Baseline f;
  ground::GroundOptions opt;
  opt.atom_budget = 50;
  try {
    f.ground(opt);
    FAIL("expected budget error");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("atom budget") != std::string::npos);
  }

  feas::FeasibilityOracle empty;
  CHECK_THROWS_WITH_AS(ground::ground(f.dom, f.inst, empty), doctest::Contains("reachable"), DomainError);

  testutil::Baseline f2;
  f2.inst.init.push_back({"holding", {"left", "leg1"}, false});
  f2.inst.init.push_back({"humanHoldingPart", {"leg2"}, false});
  f2.inst.init.push_back({"holding", {"right", "leg2"}, false});
  CHECK_THROWS_AS(f2.ground(), DomainError);
}

TEST_CASE("grounding is deterministic") {
  testutil::Baseline a, b;
  auto ga = a.ground(), gb = b.ground();
  REQUIRE(ga.actions().size() == gb.actions().size());
  for (std::size_t i = 0; i < ga.actions().size(); ++i)
    CHECK(ga.action(static_cast<int>(i)).to_string() == gb.action(static_cast<int>(i)).to_string());
  CHECK(ga.initial() == gb.initial());
}

// Random belief states over the table instance.
namespace {

BeliefState random_state(const GroundProblem& g, std::mt19937& rng) {
  BeliefState s(g.atom_count());
  std::uniform_int_distribution<int> d(0, 9);
  for (std::size_t i = 0; i < g.atom_count(); ++i) {
    auto a = static_cast<ground::AtomId>(i);
    int r = d(rng);
    if (g.partial(a))
      s.set(a, r < 4 ? Truth::Unknown : r < 8 ? Truth::False : Truth::True);
    else
      s.set(a, r < 8 ? Truth::False : Truth::True);
  }
  return s;
}

}  // namespace

TEST_CASE("transition properties on random states") {
  testutil::Baseline f;
  auto g = f.ground();
  int checked = 0;
  for (unsigned seed = 1; seed <= 300; ++seed) {
    std::mt19937 rng(seed);
    auto s = random_state(g, rng);
    auto app = g.applicable(s);
    CHECK(app == g.applicable(BeliefState(s)));
    for (int id : app) {
      const auto& a = g.action(id);
      std::vector<std::optional<int>> branches;
      if (a.decision()) {
        auto ok = g.consistent_outcomes(s, a);
        CHECK(ok.size() >= 2);
        for (int o : ok) branches.push_back(o);
      } else {
        branches.push_back(std::nullopt);
      }
      for (auto o : branches) {
        BeliefState t;
        try {
          t = g.successor(s, a, o);
        } catch (const DomainError&) {
          continue;
        }
        ++checked;
        const auto& lits = o ? a.outcomes[*o].lits : a.effects;
        std::set<ground::AtomId> touched;
        for (const auto& l : lits) {
          touched.insert(l.atom);
          CHECK(t.get(l.atom) == (l.positive ? Truth::True : Truth::False));
        }
        for (std::size_t i = 0; i < g.atom_count(); ++i) {
          auto at = static_cast<ground::AtomId>(i);
          if (!touched.count(at)) CHECK(t.get(at) == s.get(at));  // inertia
          if (s.known(at)) CHECK(t.known(at));                   // knowledge only grows
        }
      }
    }
  }
  CHECK(checked > 300);
}

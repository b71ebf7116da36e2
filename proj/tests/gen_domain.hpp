// Random well-formed ADL-H domains for round-trip properties.
#pragma once

#include <random>

#include "cohap/adl.hpp"

namespace testgen {

using namespace cohap::adl;

class DomainGen {
 public:
  explicit DomainGen(unsigned seed) : rng_(seed) {}

  DomainSpec operator()() {
    DomainSpec d;
    int nsorts = pick(1, 3);
    for (int i = 0; i < nsorts; ++i) {
      SortDecl s{"s" + std::to_string(i), {}, {}};
      if (coin()) s.members = {"k" + std::to_string(i) + "a", "k" + std::to_string(i) + "b"};
      d.sorts.push_back(s);
    }
    int nfl = pick(1, 4);
    for (int i = 0; i < nfl; ++i) {
      FluentSchema f;
      f.name = "f" + std::to_string(i);
      int ar = pick(0, 2);
      for (int k = 0; k < ar; ++k) f.arg_sorts.push_back(sort_name(d));
      f.observability = coin() ? Observability::Partial : Observability::Full;
      d.fluents.push_back(f);
    }
    int nst = pick(0, 2);
    for (int i = 0; i < nst; ++i) {
      RelationDecl r{"st" + std::to_string(i), pick(1, 2), {}, {}};
      if (coin())
        for (int k = 0; k < r.arity; ++k) r.arg_sorts.push_back(sort_name(d));
      d.statics.push_back(r);
    }
    if (coin()) d.externals.push_back({"ext", 1, {}, {}});
    if (coin()) {
      FailureRule fr{"fail0", {{"X", sort_name(d)}}, {}, {}};
      fr.body.push_back(lit_cond(d, {"X"}, false));
      if (!d.externals.empty()) fr.body.push_back(wrap_not(ext_cond({"X"})));
      d.failures.push_back(fr);
    }
    int nact = pick(0, 3);
    for (int i = 0; i < nact; ++i) d.actions.push_back(action(d, i));
    int ncon = pick(0, 2);
    for (int i = 0; i < ncon; ++i) {
      ConstraintRule c;
      if (coin()) c.label = "lab" + std::to_string(i);
      c.body = body(d, {"Y"});
      if (!d.actions.empty() && coin()) c.body.push_back(occurs(d));
      d.constraints.push_back(c);
    }
    int nweak = pick(0, 2);
    for (int i = 0; i < nweak; ++i) {
      WeakConstraint w;
      if (coin()) w.label = "w" + std::to_string(i);
      w.body = body(d, {"Z"});
      if (coin()) w.body.push_back(Condition{OccursCond{std::string("sensing"), std::nullopt}, {}});
      w.weight = pick(1, 5);
      w.level = pick(1, 3);
      d.weak.push_back(w);
    }
    return d;
  }

 private:
  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin() { return pick(0, 1) == 1; }

  std::string sort_name(const DomainSpec& d) { return d.sorts[pick(0, (int)d.sorts.size() - 1)].name; }

  Term term(const std::vector<std::string>& vars) {
    if (!vars.empty() && pick(0, 2) > 0) return {vars[pick(0, (int)vars.size() - 1)], true};
    return {"c" + std::to_string(pick(0, 2)), false};
  }

  Atom fluent_atom(const DomainSpec& d, const std::vector<std::string>& vars) {
    const auto& f = d.fluents[pick(0, (int)d.fluents.size() - 1)];
    Atom a{f.name, {}, AtomCategory::Fluent, {}};
    for (size_t i = 0; i < f.arg_sorts.size(); ++i) a.args.push_back(term(vars));
    return a;
  }

  Condition lit_cond(const DomainSpec& d, const std::vector<std::string>& vars, bool allow_neg) {
    Literal l{fluent_atom(d, vars), allow_neg && coin()};
    return Condition{LiteralCond{l}, {}};
  }

  Condition ext_cond(const std::vector<std::string>& vars) {
    return Condition{ExternalCond{Atom{"ext", {term(vars)}, AtomCategory::Unresolved, {}}}, {}};
  }

  static Condition wrap_not(Condition c) {
    NotCond n;
    n.body.push_back(std::move(c));
    return Condition{std::move(n), {}};
  }

  Condition cond(const DomainSpec& d, const std::vector<std::string>& vars, int depth) {
    switch (pick(0, depth > 0 ? 5 : 3)) {
      case 0:
      case 1:
        return lit_cond(d, vars, true);
      case 2: {
        CountCond cc;
        cc.templ = fluent_atom(d, {"W"});
        cc.guard.push_back(Atom{sort_name(d), {{"W", true}}, AtomCategory::Sort, {}});
        cc.op = static_cast<CompareOp>(pick(0, 2));
        cc.bound = pick(0, 3);
        return Condition{cc, {}};
      }
      case 3:
        if (!d.statics.empty()) {
          const auto& s = d.statics[pick(0, (int)d.statics.size() - 1)];
          Atom a{s.name, {}, AtomCategory::Static, {}};
          for (int i = 0; i < s.arity; ++i) a.args.push_back(term(vars));
          return Condition{LiteralCond{{a, false}}, {}};
        }
        return Condition{CompareCond{term(vars), term(vars), coin()}, {}};
      case 4: {
        NotCond n;
        int k = pick(1, 2);
        for (int i = 0; i < k; ++i) n.body.push_back(cond(d, vars, depth - 1));
        return Condition{std::move(n), {}};
      }
      default:
        return Condition{CompareCond{term(vars), term(vars), coin()}, {}};
    }
  }

  std::vector<Condition> body(const DomainSpec& d, const std::vector<std::string>& vars) {
    std::vector<Condition> b;
    int n = pick(1, 3);
    for (int i = 0; i < n; ++i) b.push_back(cond(d, vars, 2));
    return b;
  }

  Condition occurs(const DomainSpec& d) {
    const auto& a = d.actions[pick(0, (int)d.actions.size() - 1)];
    Atom at{a.name, {}, AtomCategory::Unresolved, {}};
    for (size_t i = 0; i < a.params.size(); ++i) at.args.push_back({"V" + std::to_string(i), true});
    return Condition{OccursCond{std::nullopt, at}, {}};
  }

  Literal effect_lit(const DomainSpec& d, const std::vector<std::string>& vars) {
    return {fluent_atom(d, vars), coin()};
  }

  ActionSchema action(const DomainSpec& d, int idx) {
    ActionSchema a;
    a.name = "act" + std::to_string(idx);
    int np = pick(0, 2);
    std::vector<std::string> vars;
    for (int i = 0; i < np; ++i) {
      a.params.push_back({"p" + std::to_string(i), sort_name(d)});
      vars.push_back("p" + std::to_string(i));
    }
    int ncl = pick(0, 2);
    for (int i = 0; i < ncl; ++i) a.pre_clauses.push_back(body(d, vars));
    int kind = pick(0, 3);
    if (kind == 0 || kind == 2) {
      a.kind = kind == 0 ? ActionKind::Actuation : ActionKind::CommDet;
      int ne = pick(1, 2);
      for (int i = 0; i < ne; ++i) a.effects.push_back(effect_lit(d, vars));
      return a;
    }
    a.kind = kind == 1 ? ActionKind::Sensing : ActionKind::CommNondet;
    // Ranged outcomes need a fluent with arity >= 1.
    const FluentSchema* unary = nullptr;
    for (const auto& f : d.fluents)
      if (!f.arg_sorts.empty()) unary = &f;
    if (unary && coin()) {
      RangedOutcome r;
      r.templ.atom = Atom{unary->name, {}, AtomCategory::Fluent, {}};
      r.templ.atom.args.push_back({"R", true});
      for (size_t i = 1; i < unary->arg_sorts.size(); ++i) r.templ.atom.args.push_back(term(vars));
      r.var = "R";
      r.sort = unary->arg_sorts[0];
      a.outcomes = OutcomeSet{r};
    } else {
      std::vector<NamedOutcome> named;
      Atom base = fluent_atom(d, vars);
      named.push_back({"yes", {{base, false}}});
      named.push_back({"no", {{base, true}}});
      a.outcomes = OutcomeSet{named};
    }
    return a;
  }

  std::mt19937 rng_;
};

}  // namespace testgen

#include "cohap/grounder.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <set>
#include <sstream>

#include "cohap/diag.hpp"

namespace cohap::ground {

using adl::ActionKind;
using adl::AtomCategory;
using adl::CompareOp;
using adl::Condition;

// ---- BeliefState ----

BeliefState::BeliefState(std::size_t n)
    : n_(n), value_off_((n + 63) / 64), words_(2 * value_off_, 0) {}

Truth BeliefState::get(AtomId a) const {
  if (!known(a)) return Truth::Unknown;
  return is_true(a) ? Truth::True : Truth::False;
}

void BeliefState::set(AtomId a, Truth t) {
  std::size_t w = static_cast<std::size_t>(a) >> 6;
  std::uint64_t m = std::uint64_t{1} << (a & 63);
  if (t == Truth::Unknown) {
    words_[w] &= ~m;
    words_[value_off_ + w] &= ~m;
    return;
  }
  words_[w] |= m;
  if (t == Truth::True)
    words_[value_off_ + w] |= m;
  else
    words_[value_off_ + w] &= ~m;
}

std::size_t BeliefState::hash() const {
  std::uint64_t h = 0x9e3779b97f4a7c15ull;
  for (auto w : words_) {
    std::uint64_t z = w + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    h ^= z ^ (z >> 31);
  }
  return static_cast<std::size_t>(h);
}

std::string GroundAction::to_string() const {
  if (args.empty()) return name;
  std::string s = name + "(";
  for (std::size_t i = 0; i < args.size(); ++i) s += (i ? "," : "") + args[i];
  return s + ")";
}

// ---- condition folding ----

namespace {

GCond mk_lit(AtomId a, bool positive) {
  GCond c;
  c.op = GCond::Op::Lit;
  c.atom = a;
  c.positive = positive;
  return c;
}

GCond mk_not(GCond g) {
  if (g.is_const()) return GCond::constant(!g.value);
  GCond c;
  c.op = GCond::Op::Not;
  c.kids.push_back(std::move(g));
  return c;
}

GCond mk_and(std::vector<GCond> kids) {
  std::vector<GCond> keep;
  for (auto& k : kids) {
    if (k.is_const()) {
      if (!k.value) return GCond::constant(false);
      continue;
    }
    if (k.op == GCond::Op::And) {
      for (auto& kk : k.kids) keep.push_back(std::move(kk));
    } else {
      keep.push_back(std::move(k));
    }
  }
  if (keep.empty()) return GCond::constant(true);
  if (keep.size() == 1) return std::move(keep[0]);
  GCond c;
  c.op = GCond::Op::And;
  c.kids = std::move(keep);
  return c;
}

GCond mk_or(std::vector<GCond> kids) {
  std::vector<GCond> keep;
  for (auto& k : kids) {
    if (k.is_const()) {
      if (k.value) return GCond::constant(true);
      continue;
    }
    keep.push_back(std::move(k));
  }
  if (keep.empty()) return GCond::constant(false);
  if (keep.size() == 1) return std::move(keep[0]);
  GCond c;
  c.op = GCond::Op::Or;
  c.kids = std::move(keep);
  return c;
}

bool compare(int n, CompareOp op, int bound) {
  switch (op) {
    case CompareOp::Le: return n <= bound;
    case CompareOp::Eq: return n == bound;
    case CompareOp::Ge: return n >= bound;
  }
  return false;
}

GCond mk_count(std::vector<GCond> kids, CompareOp op, int bound) {
  GCond c;
  c.op = GCond::Op::Count;
  c.cmp = op;
  c.bound = bound;
  for (auto& k : kids) {
    if (k.is_const()) {
      c.offset += k.value ? 1 : 0;
      continue;
    }
    c.kids.push_back(std::move(k));
  }
  if (c.kids.empty()) return GCond::constant(compare(c.offset, op, bound));
  int lo = c.offset, hi = c.offset + static_cast<int>(c.kids.size());
  // Decided regardless of the unknown part?
  bool all_true = true, all_false = true;
  for (int n = lo; n <= hi; ++n) {
    bool v = compare(n, op, bound);
    all_true &= v;
    all_false &= !v;
  }
  if (all_true) return GCond::constant(true);
  if (all_false) return GCond::constant(false);
  return c;
}

std::string call_key(const std::string& name, const std::vector<std::string>& args) {
  std::string s = name + "(";
  for (std::size_t i = 0; i < args.size(); ++i) s += (i ? "," : "") + args[i];
  return s + ")";
}

bool kind_matches(const std::string& kind, ActionKind k) {
  if (kind == "actuation") return k == ActionKind::Actuation;
  if (kind == "sensing") return k == ActionKind::Sensing;
  return adl::is_communication(k);
}

void add_mask(std::vector<std::pair<std::uint32_t, std::uint64_t>>& v, AtomId a) {
  auto w = static_cast<std::uint32_t>(a >> 6);
  std::uint64_t m = std::uint64_t{1} << (a & 63);
  for (auto& [ww, mm] : v)
    if (ww == w) {
      mm |= m;
      return;
    }
  v.emplace_back(w, m);
}

}  // namespace

// ---- grounder ----

using Binding = std::map<std::string, std::string>;

class Grounder {
 public:
  Grounder(const adl::DomainSpec& dom, const adl::InstanceSpec& inst, feas::FeasibilityOracle& fx,
           const GroundOptions& opt)
      : fx_(fx), opt_(opt) {
    P_.dom_ = std::make_shared<adl::DomainSpec>(dom);
    P_.inst_ = std::make_shared<adl::InstanceSpec>(inst);
  }

  GroundProblem run() {
    auto t0 = std::chrono::steady_clock::now();
    const auto& dom = *P_.dom_;
    for (const auto& e : dom.externals)
      if (!fx_.has(e.name))
        throw DomainError("missing external implementation for '" + e.name + "/" +
                          std::to_string(e.arity) + "'");
    universe();
    statics();
    atoms();
    initial_state();
    constraints();
    actions();

    P_.stats_.atoms = P_.atom_names_.size();
    P_.stats_.actions = P_.actions_.size();
    P_.stats_.live_actions = P_.live_.size();
    P_.stats_.external_calls = external_calls_;
    P_.stats_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream f;
    f << "\"atoms\":" << P_.stats_.atoms << ",\"actions\":" << P_.stats_.actions
      << ",\"live\":" << P_.stats_.live_actions << ",\"external_calls\":" << external_calls_
      << ",\"seconds\":" << P_.stats_.seconds;
    diag::record(diag::Level::Info, "ground", f.str());
    return std::move(P_);
  }

 private:
  void budget(std::size_t more) {
    used_ += more;
    if (used_ > opt_.atom_budget)
      throw DomainError("grounding exceeds atom budget: " + std::to_string(used_) + " > " +
                        std::to_string(opt_.atom_budget) + " (" +
                        std::to_string(P_.atom_names_.size()) + " fluent atoms, " +
                        std::to_string(P_.actions_.size()) + " actions so far)");
  }

  void universe() {
    for (const auto& s : P_.dom_->sorts) {
      auto& mem = P_.sort_members_[s.name];
      mem = s.members;
      auto it = P_.inst_->objects.find(s.name);
      if (it != P_.inst_->objects.end()) mem.insert(mem.end(), it->second.begin(), it->second.end());
      for (std::size_t i = 0; i < mem.size(); ++i) {
        if (P_.const_index_.count(mem[i]))
          throw DomainError("constant '" + mem[i] + "' belongs to more than one sort");
        P_.const_index_[mem[i]] = {s.name, i};
      }
    }
  }

  void statics() {
    P_.statics_ = P_.inst_->statics;
    if (P_.dom_->find_static("unsafeRegion")) {
      auto& tuples = P_.statics_["unsafeRegion"];
      for (const auto& r : opt_.unsafe_regions)
        if (P_.const_index_.count(r) &&
            std::find(tuples.begin(), tuples.end(), std::vector<std::string>{r}) == tuples.end())
          tuples.push_back({r});
    }
    for (const auto& [name, tuples] : P_.statics_)
      static_set_[name].insert(tuples.begin(), tuples.end());
  }

  void atoms() {
    for (const auto& f : P_.dom_->fluents) {
      std::vector<std::size_t> strides(f.arg_sorts.size());
      std::size_t total = 1;
      for (std::size_t i = f.arg_sorts.size(); i-- > 0;) {
        strides[i] = total;
        total *= P_.sort_members_[f.arg_sorts[i]].size();
      }
      budget(total);
      auto base = static_cast<AtomId>(P_.atom_names_.size());
      P_.fluent_index_[f.name] = {base, strides};
      for (std::size_t k = 0; k < total; ++k) {
        std::vector<std::string> args;
        for (std::size_t i = 0; i < f.arg_sorts.size(); ++i)
          args.push_back(P_.sort_members_[f.arg_sorts[i]][(k / strides[i]) %
                                                           P_.sort_members_[f.arg_sorts[i]].size()]);
        P_.atom_names_.push_back(call_key_opt(f.name, args));
        P_.partial_.push_back(f.observability == adl::Observability::Partial);
      }
    }
  }

  static std::string call_key_opt(const std::string& name, const std::vector<std::string>& args) {
    return args.empty() ? name : call_key(name, args);
  }

  AtomId atom_of(const std::string& fluent, const std::vector<std::string>& args) const {
    auto id = P_.find_atom(fluent, args);
    if (!id) throw DomainError("ill-sorted or unknown ground atom " + call_key_opt(fluent, args));
    return *id;
  }

  void initial_state() {
    P_.init_ = BeliefState(P_.atom_names_.size());
    for (std::size_t a = 0; a < P_.atom_names_.size(); ++a)
      if (!P_.partial_[a]) P_.init_.set(static_cast<AtomId>(a), Truth::False);
    for (const auto& l : P_.inst_->init)
      P_.init_.set(atom_of(l.fluent, l.args), l.negative ? Truth::False : Truth::True);
    for (const auto& l : P_.inst_->goal) P_.goal_.push_back({atom_of(l.fluent, l.args), !l.negative});
  }

  // ---- terms and bindings ----

  static bool bound(const adl::Term& t, const Binding& b) { return !t.is_var || b.count(t.name); }

  static const std::string& value(const adl::Term& t, const Binding& b) {
    return t.is_var ? b.at(t.name) : t.name;
  }

  std::vector<std::string> ground_args(const adl::Atom& a, const Binding& b) const {
    std::vector<std::string> out;
    for (const auto& t : a.args) {
      if (t.is_var && !b.count(t.name))
        throw DomainError("unbound variable '" + t.name + "' in " + adl::to_string(a));
      out.push_back(value(t, b));
    }
    return out;
  }

  bool all_bound(const adl::Atom& a, const Binding& b) const {
    for (const auto& t : a.args)
      if (!bound(t, b)) return false;
    return true;
  }

  // Vars occurring at the top level of a conjunction (not inside not/count).
  static void top_vars(const std::vector<Condition>& cs, std::vector<std::string>& out) {
    auto add = [&](const adl::Term& t) {
      if (t.is_var && std::find(out.begin(), out.end(), t.name) == out.end()) out.push_back(t.name);
    };
    for (const auto& c : cs) {
      if (const auto* l = std::get_if<adl::LiteralCond>(&c.node)) {
        for (const auto& t : l->lit.atom.args) add(t);
      } else if (const auto* e = std::get_if<adl::ExternalCond>(&c.node)) {
        for (const auto& t : e->atom.args) add(t);
      } else if (const auto* cmp = std::get_if<adl::CompareCond>(&c.node)) {
        add(cmp->lhs);
        add(cmp->rhs);
      } else if (const auto* o = std::get_if<adl::OccursCond>(&c.node)) {
        if (o->action)
          for (const auto& t : o->action->args) add(t);
      }
    }
  }

  std::optional<std::string> sort_at(const adl::Atom& a, std::size_t i, bool external) const {
    const auto& dom = *P_.dom_;
    if (external) {
      const auto* e = dom.find_external(a.pred);
      if (e && i < e->arg_sorts.size()) return e->arg_sorts[i];
      return std::nullopt;
    }
    switch (a.category) {
      case AtomCategory::Fluent:
        return dom.find_fluent(a.pred)->arg_sorts[i];
      case AtomCategory::Static: {
        const auto* s = dom.find_static(a.pred);
        if (i < s->arg_sorts.size()) return s->arg_sorts[i];
        return std::nullopt;
      }
      case AtomCategory::Failure:
        return dom.find_failure(a.pred)->params[i].sort;
      case AtomCategory::Sort:
        return a.pred;
      default:
        if (const auto* act = dom.find_action(a.pred)) return act->params[i].sort;
        return std::nullopt;
    }
  }

  std::optional<std::string> infer_sort(const std::string& v, const std::vector<Condition>& cs) const {
    std::function<std::optional<std::string>(const adl::Atom&, bool)> in_atom =
        [&](const adl::Atom& a, bool ext) -> std::optional<std::string> {
      for (std::size_t i = 0; i < a.args.size(); ++i)
        if (a.args[i].is_var && a.args[i].name == v)
          if (auto s = sort_at(a, i, ext)) return s;
      return std::nullopt;
    };
    std::function<std::optional<std::string>(const std::vector<Condition>&)> walk =
        [&](const std::vector<Condition>& xs) -> std::optional<std::string> {
      for (const auto& c : xs) {
        std::optional<std::string> r;
        if (const auto* l = std::get_if<adl::LiteralCond>(&c.node)) {
          r = in_atom(l->lit.atom, false);
        } else if (const auto* n = std::get_if<adl::NotCond>(&c.node)) {
          r = walk(n->body);
        } else if (const auto* cc = std::get_if<adl::CountCond>(&c.node)) {
          r = in_atom(cc->templ, false);
          for (const auto& g : cc->guard)
            if (!r) r = in_atom(g, false);
        } else if (const auto* e = std::get_if<adl::ExternalCond>(&c.node)) {
          r = in_atom(e->atom, true);
        } else if (const auto* o = std::get_if<adl::OccursCond>(&c.node)) {
          if (o->action) r = in_atom(*o->action, false);
        }
        if (r) return r;
      }
      return std::nullopt;
    };
    return walk(cs);
  }

  // ---- static evaluation ----

  bool static_holds(const std::string& rel, const std::vector<std::string>& args) const {
    auto it = static_set_.find(rel);
    return it != static_set_.end() && it->second.count(args);
  }

  bool in_sort(const std::string& sort, const std::string& c) const {
    auto it = P_.const_index_.find(c);
    return it != P_.const_index_.end() && it->second.first == sort;
  }

  bool external(const std::string& name, const std::vector<std::string>& args) {
    auto key = call_key(name, args);
    auto it = ext_memo_.find(key);
    if (it != ext_memo_.end()) return it->second;
    ++external_calls_;
    bool v = fx_.eval(name, args);
    ext_memo_.emplace(key, v);
    return v;
  }

  // Decidable without a state once its variables are bound.
  std::optional<bool> static_value(const Condition& c, const Binding& b) {
    if (const auto* l = std::get_if<adl::LiteralCond>(&c.node)) {
      const auto& a = l->lit.atom;
      if (!all_bound(a, b)) return std::nullopt;
      if (a.category == AtomCategory::Static) return static_holds(a.pred, ground_args(a, b));
      if (a.category == AtomCategory::Sort) return in_sort(a.pred, value(a.args[0], b));
      return std::nullopt;
    }
    if (const auto* cmp = std::get_if<adl::CompareCond>(&c.node)) {
      if (!bound(cmp->lhs, b) || !bound(cmp->rhs, b)) return std::nullopt;
      return (value(cmp->lhs, b) == value(cmp->rhs, b)) == cmp->equal;
    }
    if (const auto* e = std::get_if<adl::ExternalCond>(&c.node)) {
      if (!all_bound(e->atom, b)) return std::nullopt;
      return external(e->atom.pred, ground_args(e->atom, b));
    }
    return std::nullopt;
  }

  // Enumerates every binding of the conjunction's top-level variables.
  void expand(const std::vector<Condition>& cs, Binding& b, const std::function<void(Binding&)>& emit) {
    for (const auto& c : cs) {
      auto v = static_value(c, b);
      if (v && !*v) return;
    }
    // Bind through static tuples first, then sort atoms.
    for (const auto& c : cs) {
      const auto* l = std::get_if<adl::LiteralCond>(&c.node);
      if (!l || l->lit.negative || all_bound(l->lit.atom, b)) continue;
      const auto& a = l->lit.atom;
      if (a.category == AtomCategory::Static) {
        auto it = P_.statics_.find(a.pred);
        if (it == P_.statics_.end()) return;
        for (const auto& tup : it->second) {
          std::vector<std::string> added;
          bool ok = true;
          for (std::size_t i = 0; i < a.args.size() && ok; ++i) {
            const auto& t = a.args[i];
            if (!t.is_var) {
              ok = t.name == tup[i];
            } else if (auto bi = b.find(t.name); bi != b.end()) {
              ok = bi->second == tup[i];
            } else {
              b[t.name] = tup[i];
              added.push_back(t.name);
            }
          }
          if (ok) expand(cs, b, emit);
          for (const auto& n : added) b.erase(n);
        }
        return;
      }
      if (a.category == AtomCategory::Sort) {
        for (const auto& m : P_.sort_members_[a.pred]) {
          b[a.args[0].name] = m;
          expand(cs, b, emit);
        }
        b.erase(a.args[0].name);
        return;
      }
    }
    std::vector<std::string> vars;
    top_vars(cs, vars);
    for (const auto& v : vars) {
      if (b.count(v)) continue;
      auto sort = infer_sort(v, cs);
      if (!sort) throw DomainError("cannot infer the sort of variable '" + v + "'");
      for (const auto& m : P_.sort_members_[*sort]) {
        b[v] = m;
        expand(cs, b, emit);
      }
      b.erase(v);
      return;
    }
    emit(b);
  }

  GCond compile(const Condition& c, Binding& b) {
    if (auto v = static_value(c, b)) return GCond::constant(*v);
    if (const auto* l = std::get_if<adl::LiteralCond>(&c.node)) {
      const auto& a = l->lit.atom;
      auto args = ground_args(a, b);
      if (a.category == AtomCategory::Fluent) {
        for (std::size_t i = 0; i < args.size(); ++i)
          if (!in_sort(*sort_at(a, i, false), args[i])) return GCond::constant(l->lit.negative);
        return mk_lit(atom_of(a.pred, args), !l->lit.negative);
      }
      if (a.category == AtomCategory::Failure) return failure(a.pred, args);
      throw DomainError("cannot ground " + adl::to_string(a));
    }
    if (const auto* n = std::get_if<adl::NotCond>(&c.node)) return mk_not(exists(n->body, b));
    if (const auto* cc = std::get_if<adl::CountCond>(&c.node)) {
      std::vector<Condition> guard;
      for (const auto& g : cc->guard) guard.push_back(Condition{adl::LiteralCond{{g, false}}, {}});
      std::vector<GCond> kids;
      std::set<std::string> seen;
      Binding inner = b;
      expand(guard, inner, [&](Binding& bb) {
        auto args = ground_args(cc->templ, bb);
        if (!seen.insert(call_key(cc->templ.pred, args)).second) return;
        if (cc->templ.category == AtomCategory::Failure) {
          kids.push_back(failure(cc->templ.pred, args));
        } else {
          bool ok = true;
          for (std::size_t i = 0; i < args.size(); ++i)
            ok &= in_sort(*sort_at(cc->templ, i, false), args[i]);
          kids.push_back(ok ? mk_lit(atom_of(cc->templ.pred, args), true) : GCond::constant(false));
        }
      });
      return mk_count(std::move(kids), cc->op, cc->bound);
    }
    if (std::holds_alternative<adl::OccursCond>(c.node))
      throw DomainError("'occurs' is only allowed in constraint bodies");
    throw DomainError("cannot ground condition " + adl::to_string(c));
  }

  GCond conj(const std::vector<Condition>& cs, Binding& b) {
    std::vector<GCond> parts;
    for (const auto& c : cs) {
      parts.push_back(compile(c, b));
      if (parts.back().is_const() && !parts.back().value) return GCond::constant(false);
    }
    return mk_and(std::move(parts));
  }

  // Existential closure over the conjunction's free variables.
  GCond exists(const std::vector<Condition>& cs, const Binding& outer) {
    std::vector<GCond> alts;
    bool done = false;
    Binding b = outer;
    expand(cs, b, [&](Binding& bb) {
      if (done) return;
      auto g = conj(cs, bb);
      if (g.is_const() && g.value) done = true;
      alts.push_back(std::move(g));
    });
    return mk_or(std::move(alts));
  }

  // One ground instance per binding (weak constraints count instances).
  std::vector<GCond> instances(const std::vector<Condition>& cs, const Binding& outer,
                               std::vector<std::string>* texts = nullptr) {
    std::vector<GCond> out;
    Binding b = outer;
    expand(cs, b, [&](Binding& bb) {
      auto g = conj(cs, bb);
      if (g.is_const() && !g.value) return;
      if (texts) {
        std::string t;
        for (const auto& [k, v] : bb) t += (t.empty() ? "" : ", ") + k + "=" + v;
        texts->push_back(t);
      }
      out.push_back(std::move(g));
    });
    return out;
  }

  GCond failure(const std::string& name, const std::vector<std::string>& args) {
    auto key = call_key(name, args);
    auto it = P_.failures_.find(key);
    if (it != P_.failures_.end()) return it->second;
    const auto* rule = P_.dom_->find_failure(name);
    Binding b;
    for (std::size_t i = 0; i < rule->params.size(); ++i) {
      if (!in_sort(rule->params[i].sort, args[i])) {
        P_.failures_[key] = GCond::constant(false);
        return GCond::constant(false);
      }
      b[rule->params[i].name] = args[i];
    }
    auto g = exists(rule->body, b);
    P_.failures_[key] = g;
    return g;
  }

  // ---- constraints ----

  struct OccursRule {
    std::string label;
    std::vector<const adl::OccursCond*> occurs;
    std::vector<Condition> rest;
    bool weak = false;
    int weight = 1;
    int level = 1;
  };

  static void split(const std::vector<Condition>& body, OccursRule& r) {
    for (const auto& c : body) {
      if (const auto* o = std::get_if<adl::OccursCond>(&c.node))
        r.occurs.push_back(o);
      else
        r.rest.push_back(c);
    }
  }

  void constraints() {
    const auto& dom = *P_.dom_;
    for (const auto& c : dom.constraints) {
      OccursRule r;
      r.label = c.label;
      split(c.body, r);
      if (r.label == "safety" && !opt_.safety_strict) {
        r.weak = true;
        r.weight = 1;
        r.level = 3;
      }
      if (!r.occurs.empty()) {
        occurs_rules_.push_back(std::move(r));
        continue;
      }
      std::vector<std::string> texts;
      auto inst = instances(r.rest, {}, &texts);
      for (std::size_t i = 0; i < inst.size(); ++i) {
        std::string text = (c.label.empty() ? "" : c.label + ": ");
        for (std::size_t k = 0; k < c.body.size(); ++k) text += (k ? ", " : "") + adl::to_string(c.body[k]);
        if (!texts[i].empty()) text += " [" + texts[i] + "]";
        if (inst[i].is_const()) throw DomainError("constraint violated in every state: " + text);
        P_.state_constraints_.push_back({text, std::move(inst[i])});
      }
    }
    for (const auto& sc : P_.state_constraints_)
      if (P_.holds(sc.cond, P_.init_)) throw DomainError("initial state violates constraint " + sc.text);

    for (const auto& w : dom.weak) {
      OccursRule r;
      r.label = w.label;
      split(w.body, r);
      r.weak = true;
      r.weight = w.weight;
      if (auto it = opt_.weak_weights.find(w.label); it != opt_.weak_weights.end()) r.weight = it->second;
      r.level = w.level;
      if (!r.occurs.empty()) {
        occurs_rules_.push_back(std::move(r));
        continue;
      }
      WeakTerm t{r.label, r.level, r.weight, 0, {}};
      for (auto& g : instances(r.rest, {})) {
        if (g.is_const())
          ++t.base;
        else
          t.instances.push_back(std::move(g));
      }
      if (t.base || !t.instances.empty()) P_.step_weak_.push_back(std::move(t));
    }
  }

  static bool match(const adl::OccursCond& oc, const GroundAction& ga, Binding& b) {
    if (oc.kind) return kind_matches(*oc.kind, ga.kind);
    if (oc.action->pred != ga.name) return false;
    for (std::size_t i = 0; i < ga.args.size(); ++i) {
      const auto& t = oc.action->args[i];
      if (!t.is_var) {
        if (t.name != ga.args[i]) return false;
      } else if (auto it = b.find(t.name); it != b.end()) {
        if (it->second != ga.args[i]) return false;
      } else {
        b[t.name] = ga.args[i];
      }
    }
    return true;
  }

  // ---- actions ----

  void actions() {
    const auto& dom = *P_.dom_;
    for (std::size_t si = 0; si < dom.actions.size(); ++si) {
      const auto& sch = dom.actions[si];
      std::vector<std::vector<std::string>> tuples{{}};
      for (const auto& p : sch.params) {
        std::vector<std::vector<std::string>> next;
        for (const auto& t : tuples)
          for (const auto& m : P_.sort_members_[p.sort]) {
            next.push_back(t);
            next.back().push_back(m);
          }
        tuples = std::move(next);
      }
      budget(tuples.size());
      std::sort(tuples.begin(), tuples.end());
      for (const auto& args : tuples) build_action(static_cast<int>(si), sch, args);
    }
  }

  void build_action(int si, const adl::ActionSchema& sch, const std::vector<std::string>& args) {
    GroundAction ga;
    ga.id = static_cast<int>(P_.actions_.size());
    ga.schema = si;
    ga.name = sch.name;
    ga.args = args;
    ga.kind = sch.kind;
    Binding b;
    for (std::size_t i = 0; i < args.size(); ++i) b[sch.params[i].name] = args[i];

    std::vector<GCond> pre;
    for (const auto& cl : sch.pre_clauses) {
      pre.push_back(exists(cl, b));
      if (pre.back().is_const() && !pre.back().value) break;
    }
    GCond all = mk_and(std::move(pre));
    if (!(all.is_const() && !all.value)) {
      std::vector<GCond> more{std::move(all)};
      for (const auto& r : occurs_rules_) {
        Binding rb;
        bool ok = true;
        for (const auto* oc : r.occurs) ok = ok && match(*oc, ga, rb);
        if (!ok) continue;
        if (r.weak) {
          WeakTerm t{r.label, r.level, r.weight, 0, {}};
          for (auto& g : instances(r.rest, rb)) {
            if (g.is_const())
              ++t.base;
            else
              t.instances.push_back(std::move(g));
          }
          if (t.base || !t.instances.empty()) ga.weak.push_back(std::move(t));
        } else {
          more.push_back(mk_not(exists(r.rest, rb)));
        }
      }
      all = mk_and(std::move(more));
    }
    ga.dead = all.is_const() && !all.value;
    split_mask(all, ga);

    if (!ga.dead) {
      for (const auto& e : sch.effects)
        ga.effects.push_back({atom_of(e.atom.pred, ground_args(e.atom, b)), !e.negative});
      if (sch.outcomes) {
        build_outcomes(*sch.outcomes, b, ga);
        mark_observed(ga);
      }
    }
    P_.action_index_[call_key(ga.name, ga.args)] = ga.id;
    if (!ga.dead) P_.live_.push_back(ga.id);
    P_.actions_.push_back(std::move(ga));
  }

  void split_mask(GCond& all, GroundAction& ga) {
    std::vector<GCond> rest;
    auto take = [&](GCond& k) {
      if (k.op == GCond::Op::Lit) {
        add_mask(ga.mask.known, k.atom);
        add_mask(k.positive ? ga.mask.ones : ga.mask.zeros, k.atom);
        return true;
      }
      // "not f": value bit clear (unknown atoms have value 0).
      if (k.op == GCond::Op::Not && k.kids[0].op == GCond::Op::Lit && k.kids[0].positive) {
        add_mask(ga.mask.zeros, k.kids[0].atom);
        return true;
      }
      return false;
    };
    if (all.is_const()) {
      ga.residual = all;
      return;
    }
    if (all.op == GCond::Op::And) {
      for (auto& k : all.kids)
        if (!take(k)) rest.push_back(std::move(k));
      ga.residual = mk_and(std::move(rest));
    } else if (take(all)) {
      ga.residual = GCond::constant(true);
    } else {
      ga.residual = std::move(all);
    }
  }

  void mark_observed(GroundAction& ga) const {
    for (auto& o : ga.outcomes)
      for (const auto& l : o.lits) {
        if (!P_.partial_[l.atom]) continue;
        bool shared = std::all_of(ga.outcomes.begin(), ga.outcomes.end(), [&](const Outcome& x) {
          return std::find(x.lits.begin(), x.lits.end(), l) != x.lits.end();
        });
        if (!shared) o.observed.push_back(l);
      }
  }

  void build_outcomes(const adl::OutcomeSet& os, const Binding& b, GroundAction& ga) {
    if (const auto* named = std::get_if<std::vector<adl::NamedOutcome>>(&os.alts)) {
      for (const auto& o : *named) {
        Outcome out{o.name, {}, {}};
        for (const auto& l : o.lits)
          out.lits.push_back({atom_of(l.atom.pred, ground_args(l.atom, b)), !l.negative});
        ga.outcomes.push_back(std::move(out));
      }
      return;
    }
    const auto& r = std::get<adl::RangedOutcome>(os.alts);
    std::vector<std::pair<std::string, AtomId>> cands;
    for (const auto& m : P_.sort_members_[r.sort]) {
      Binding bb = b;
      bb[r.var] = m;
      if (!r.guard.empty()) {
        auto g = exists(r.guard, bb);
        if (!g.is_const()) throw DomainError("ranged outcome guard of '" + ga.name + "' is not static");
        if (!g.value) continue;
      }
      cands.emplace_back(m, atom_of(r.templ.atom.pred, ground_args(r.templ.atom, bb)));
    }
    bool pos = !r.templ.negative;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      Outcome out{cands[i].first, {{cands[i].second, pos}}, {}};
      for (std::size_t j = 0; j < cands.size(); ++j)
        if (j != i) out.lits.push_back({cands[j].second, !pos});
      ga.outcomes.push_back(std::move(out));
    }
  }

  feas::FeasibilityOracle& fx_;
  GroundOptions opt_;
  GroundProblem P_;
  std::size_t used_ = 0;
  long external_calls_ = 0;
  std::map<std::string, bool> ext_memo_;
  std::map<std::string, std::set<std::vector<std::string>>> static_set_;
  std::vector<OccursRule> occurs_rules_;
};

GroundProblem ground(const adl::DomainSpec& dom, const adl::InstanceSpec& inst,
                     feas::FeasibilityOracle& fx, const GroundOptions& opt) {
  return Grounder(dom, inst, fx, opt).run();
}

// ---- GroundProblem queries ----

std::optional<AtomId> GroundProblem::find_atom(const std::string& fluent,
                                               const std::vector<std::string>& args) const {
  auto it = fluent_index_.find(fluent);
  if (it == fluent_index_.end()) return std::nullopt;
  const auto& [base, strides] = it->second;
  if (strides.size() != args.size()) return std::nullopt;
  const auto* f = dom_->find_fluent(fluent);
  std::size_t off = 0;
  for (std::size_t i = 0; i < args.size(); ++i) {
    auto c = const_index_.find(args[i]);
    if (c == const_index_.end() || c->second.first != f->arg_sorts[i]) return std::nullopt;
    off += c->second.second * strides[i];
  }
  return base + static_cast<AtomId>(off);
}

AtomId GroundProblem::atom(const std::string& text) const {
  auto l = adl::parse_ground_literal(text);
  auto id = find_atom(l.fluent, l.args);
  if (!id) throw DomainError("unknown ground atom '" + text + "'");
  return *id;
}

std::optional<int> GroundProblem::find_action(const std::string& name,
                                              const std::vector<std::string>& args) const {
  auto it = action_index_.find(call_key(name, args));
  if (it == action_index_.end()) return std::nullopt;
  return it->second;
}

bool GroundProblem::static_holds(const std::string& rel, const std::vector<std::string>& args) const {
  auto it = statics_.find(rel);
  if (it == statics_.end()) return false;
  return std::find(it->second.begin(), it->second.end(), args) != it->second.end();
}

bool GroundProblem::failure_holds(const std::string& name, const std::vector<std::string>& args,
                                  const BeliefState& s) const {
  auto it = failures_.find(call_key(name, args));
  if (it != failures_.end()) return holds(it->second, s);
  // Not referenced anywhere during grounding: evaluate directly.
  const auto* rule = dom_->find_failure(name);
  if (!rule) throw DomainError("unknown failure '" + name + "'");
  throw DomainError("failure atom " + call_key(name, args) + " was never grounded");
}

bool GroundProblem::holds(const GCond& c, const BeliefState& s) const {
  switch (c.op) {
    case GCond::Op::Const:
      return c.value;
    case GCond::Op::Lit:
      return c.positive ? s.is_true(c.atom) : s.is_false(c.atom);
    case GCond::Op::Not:
      return !holds(c.kids[0], s);
    case GCond::Op::And:
      for (const auto& k : c.kids)
        if (!holds(k, s)) return false;
      return true;
    case GCond::Op::Or:
      for (const auto& k : c.kids)
        if (holds(k, s)) return true;
      return false;
    case GCond::Op::Count: {
      int n = c.offset;
      for (const auto& k : c.kids) n += holds(k, s) ? 1 : 0;
      return compare(n, c.cmp, c.bound);
    }
  }
  return false;
}

bool GroundProblem::pre_holds(const GroundAction& a, const BeliefState& s) const {
  if (a.dead) return false;
  const auto& w = s.words();
  const std::size_t v = s.value_offset();
  for (const auto& [i, m] : a.mask.known)
    if ((w[i] & m) != m) return false;
  for (const auto& [i, m] : a.mask.ones)
    if ((w[v + i] & m) != m) return false;
  for (const auto& [i, m] : a.mask.zeros)
    if ((w[v + i] & m) != 0) return false;
  return holds(a.residual, s);
}

bool GroundProblem::goal_reached(const BeliefState& s) const {
  for (const auto& g : goal_)
    if (g.positive ? !s.is_true(g.atom) : !s.is_false(g.atom)) return false;
  return true;
}

std::vector<int> GroundProblem::consistent_outcomes(const BeliefState& s, const GroundAction& a) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < a.outcomes.size(); ++i) {
    bool ok = true;
    for (const auto& l : a.outcomes[i].observed)
      if (s.known(l.atom) && s.known(l.atom) && s.is_true(l.atom) != l.positive) {
        ok = false;
        break;
      }
    if (ok) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<int> GroundProblem::applicable(const BeliefState& s) const {
  std::vector<int> out;
  for (int id : live_) {
    const auto& a = actions_[id];
    if (!pre_holds(a, s)) continue;
    if (a.decision() && consistent_outcomes(s, a).size() < 2) continue;
    out.push_back(id);
  }
  return out;
}

BeliefState GroundProblem::successor(const BeliefState& s, const GroundAction& a,
                                     std::optional<int> o) const {
  BeliefState t = s;
  const auto& lits = o ? a.outcomes.at(*o).lits : a.effects;
  for (const auto& l : lits) t.set(l.atom, l.positive ? Truth::True : Truth::False);
  t.step = s.step + 1;
  for (const auto& sc : state_constraints_)
    if (holds(sc.cond, t))
      throw DomainError("constraint violated after " + a.to_string() +
                        (o ? "/" + a.outcomes[*o].label : std::string()) + ": " + sc.text);
  return t;
}

WeightedCost GroundProblem::step_cost(const BeliefState& s, const GroundAction& a) const {
  WeightedCost c;
  auto add = [&](const WeakTerm& t) {
    int n = t.base;
    for (const auto& g : t.instances) n += holds(g, s) ? 1 : 0;
    c.add(t.level, static_cast<long>(n) * t.weight);
  };
  for (const auto& t : a.weak) add(t);
  for (const auto& t : step_weak_) add(t);
  return c;
}

std::string GroundProblem::describe(const BeliefState& s) const {
  std::string out;
  for (std::size_t i = 0; i < atom_names_.size(); ++i) {
    auto a = static_cast<AtomId>(i);
    if (s.is_true(a)) {
      out += (out.empty() ? "" : " ") + atom_names_[i];
    } else if (partial_[i] && s.is_false(a)) {
      out += (out.empty() ? "-" : " -") + atom_names_[i];
    }
  }
  return out;
}

}  // namespace cohap::ground

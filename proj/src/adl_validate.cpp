#include <set>

#include "cohap/adl.hpp"

namespace cohap::adl {

namespace {

using VarSet = std::set<std::string>;

class Validator {
 public:
  explicit Validator(const DomainSpec& dom) : dom_(dom) {}

  std::vector<Diagnostic> run(const InstanceSpec* inst) {
    inst_ = inst;
    std::set<std::string> used_sorts;
    for (const auto& f : dom_.fluents)
      for (const auto& s : f.arg_sorts) {
        used_sorts.insert(s);
        if (!dom_.find_sort(s)) error(f.pos, "fluent '" + f.name + "' uses undeclared sort '" + s + "'");
      }
    for (const auto* rels : {&dom_.statics, &dom_.externals})
      for (const auto& r : *rels)
        for (const auto& s : r.arg_sorts) used_sorts.insert(s);
    for (const auto& fr : dom_.failures) {
      VarSet scope;
      for (const auto& p : fr.params) {
        used_sorts.insert(p.sort);
        scope.insert(p.name);
      }
      check_conj(fr.body, scope, fr.pos, "failure rule '" + fr.name + "'");
    }
    for (const auto& a : dom_.actions) {
      VarSet scope;
      for (const auto& p : a.params) {
        used_sorts.insert(p.sort);
        scope.insert(p.name);
        if (!dom_.find_sort(p.sort))
          error(a.pos, "action '" + a.name + "' uses undeclared sort '" + p.sort + "'");
      }
      for (const auto& cl : a.pre_clauses) check_conj(cl, scope, a.pos, "action '" + a.name + "'");
      check_action(a, scope, used_sorts);
    }
    for (const auto& c : dom_.constraints) check_conj(c.body, {}, c.pos, "constraint");
    for (const auto& w : dom_.weak) {
      if (w.weight < 1) error(w.pos, "weak constraint weight must be >= 1");
      if (w.level < 1) error(w.pos, "weak constraint level must be >= 1");
      check_conj(w.body, {}, w.pos, "weak constraint");
    }
    for (const auto& c : dom_.constraints) collect_sorts(c.body, used_sorts);
    for (const auto& w : dom_.weak) collect_sorts(w.body, used_sorts);
    for (const auto& a : dom_.actions)
      for (const auto& cl : a.pre_clauses) collect_sorts(cl, used_sorts);
    for (const auto& s : dom_.sorts)
      if (!used_sorts.count(s.name)) warn(s.pos, "unused sort '" + s.name + "'");
    return std::move(diags_);
  }

 private:
  void error(SourcePos p, std::string m) { diags_.push_back({Severity::Error, p, std::move(m)}); }
  void warn(SourcePos p, std::string m) { diags_.push_back({Severity::Warning, p, std::move(m)}); }

  void collect_sorts(const std::vector<Condition>& cs, std::set<std::string>& used) {
    for (const auto& c : cs) {
      if (const auto* l = std::get_if<LiteralCond>(&c.node)) {
        if (l->lit.atom.category == AtomCategory::Sort) used.insert(l->lit.atom.pred);
      } else if (const auto* n = std::get_if<NotCond>(&c.node)) {
        collect_sorts(n->body, used);
      } else if (const auto* cc = std::get_if<CountCond>(&c.node)) {
        for (const auto& g : cc->guard)
          if (g.category == AtomCategory::Sort) used.insert(g.pred);
      }
    }
  }

  static void add_vars(const Atom& a, VarSet& out) {
    for (const auto& t : a.args)
      if (t.is_var) out.insert(t.name);
  }

  // Variables bound by the positive part of a conjunction.
  static VarSet binders(const std::vector<Condition>& cs) {
    VarSet out;
    for (const auto& c : cs) {
      if (const auto* l = std::get_if<LiteralCond>(&c.node)) {
        add_vars(l->lit.atom, out);
      } else if (const auto* o = std::get_if<OccursCond>(&c.node)) {
        if (o->action) add_vars(*o->action, out);
      }
    }
    return out;
  }

  void require_bound(const Atom& a, const VarSet& bound, SourcePos pos, const std::string& where) {
    for (const auto& t : a.args)
      if (t.is_var && !bound.count(t.name))
        error(pos, where + ": unbound variable '" + t.name + "' in " + to_string(a));
  }

  void check_conj(const std::vector<Condition>& cs, VarSet scope, SourcePos pos,
                  const std::string& where) {
    auto b = binders(cs);
    scope.insert(b.begin(), b.end());
    for (const auto& c : cs) {
      SourcePos p = c.pos.line ? c.pos : pos;
      if (const auto* l = std::get_if<LiteralCond>(&c.node)) {
        check_atom_decl(l->lit.atom, p, where);
      } else if (const auto* n = std::get_if<NotCond>(&c.node)) {
        check_conj(n->body, scope, p, where);
      } else if (const auto* cc = std::get_if<CountCond>(&c.node)) {
        VarSet inner = scope;
        for (const auto& g : cc->guard) add_vars(g, inner);
        require_bound(cc->templ, inner, p, where);
        check_atom_decl(cc->templ, p, where);
      } else if (const auto* e = std::get_if<ExternalCond>(&c.node)) {
        if (!dom_.find_external(e->atom.pred))
          error(p, where + ": undeclared external '" + e->atom.pred + "'");
        require_bound(e->atom, scope, p, where);
      } else if (const auto* cmp = std::get_if<CompareCond>(&c.node)) {
        for (const auto* t : {&cmp->lhs, &cmp->rhs})
          if (t->is_var && !scope.count(t->name))
            error(p, where + ": unbound variable '" + t->name + "' in comparison");
      }
    }
  }

  void check_atom_decl(const Atom& a, SourcePos p, const std::string& where) {
    bool ok = dom_.find_fluent(a.pred) || dom_.find_static(a.pred) || dom_.find_failure(a.pred) ||
              dom_.find_sort(a.pred);
    if (!ok) error(p, where + ": undeclared relation '" + a.pred + "'");
  }

  int sort_size(const std::string& sort) const {
    int n = 0;
    if (const auto* s = dom_.find_sort(sort)) n += static_cast<int>(s->members.size());
    if (inst_) {
      auto it = inst_->objects.find(sort);
      if (it != inst_->objects.end()) n += static_cast<int>(it->second.size());
    }
    return n;
  }

  void check_fluent_lit(const Literal& l, const VarSet& scope, SourcePos pos, const std::string& where) {
    const auto* f = dom_.find_fluent(l.atom.pred);
    if (!f) {
      error(pos, where + ": effect on undeclared fluent '" + l.atom.pred + "'");
      return;
    }
    if (f->arg_sorts.size() != l.atom.args.size())
      error(pos, where + ": arity mismatch for fluent '" + l.atom.pred + "'");
    require_bound(l.atom, scope, pos, where);
  }

  void check_action(const ActionSchema& a, const VarSet& scope, std::set<std::string>& used_sorts) {
    std::string where = "action '" + a.name + "'";
    bool deterministic = a.kind == ActionKind::Actuation || a.kind == ActionKind::CommDet;
    if (deterministic) {
      if (a.effects.empty()) error(a.pos, where + ": deterministic action needs at least one effect");
      if (a.outcomes) error(a.pos, where + ": deterministic action cannot declare outcomes");
    } else {
      if (!a.outcomes) error(a.pos, where + ": decision action needs an outcome set");
      if (!a.effects.empty()) error(a.pos, where + ": decision action cannot have direct effects");
    }
    for (const auto& e : a.effects) check_fluent_lit(e, scope, a.pos, where);
    if (!a.outcomes) return;
    if (const auto* named = std::get_if<std::vector<NamedOutcome>>(&a.outcomes->alts)) {
      for (const auto& o : *named)
        for (const auto& l : o.lits) check_fluent_lit(l, scope, a.pos, where);
      if (named->size() < 2) warn(a.pos, where + ": degenerate decision node (fewer than 2 outcomes)");
      for (size_t i = 0; i < named->size(); ++i)
        for (size_t j = i + 1; j < named->size(); ++j)
          if (!contradict((*named)[i], (*named)[j]))
            error(a.pos, where + ": outcomes '" + (*named)[i].name + "' and '" + (*named)[j].name +
                             "' do not contradict on any fluent");
    } else {
      const auto& r = std::get<RangedOutcome>(a.outcomes->alts);
      used_sorts.insert(r.sort);
      VarSet inner = scope;
      inner.insert(r.var);
      check_fluent_lit(r.templ, inner, a.pos, where);
      bool occurs = false;
      for (const auto& t : r.templ.atom.args) occurs |= t.is_var && t.name == r.var;
      if (!occurs) error(a.pos, where + ": ranged variable does not occur in template");
      if (!dom_.find_sort(r.sort)) {
        error(a.pos, where + ": undeclared sort '" + r.sort + "'");
      } else if (inst_ || !dom_.find_sort(r.sort)->members.empty()) {
        if (sort_size(r.sort) < 2)
          warn(a.pos, where + ": degenerate decision node (ranged outcome over a sort with " +
                          std::to_string(sort_size(r.sort)) + " member)");
      }
    }
  }

  static bool contradict(const NamedOutcome& a, const NamedOutcome& b) {
    for (const auto& x : a.lits)
      for (const auto& y : b.lits)
        if (x.atom == y.atom && x.negative != y.negative) return true;
    return false;
  }

  const DomainSpec& dom_;
  const InstanceSpec* inst_ = nullptr;
  std::vector<Diagnostic> diags_;
};

}  // namespace

std::vector<Diagnostic> validate(const DomainSpec& dom) { return Validator(dom).run(nullptr); }

std::vector<Diagnostic> validate(const DomainSpec& dom, const InstanceSpec& inst) {
  return Validator(dom).run(&inst);
}

}  // namespace cohap::adl

#include <sstream>

#include "cohap/adl.hpp"

namespace cohap::adl {

namespace {

std::string join_conds(const std::vector<Condition>& cs) {
  std::string s;
  for (size_t i = 0; i < cs.size(); ++i) s += (i ? ", " : "") + to_string(cs[i]);
  return s;
}

std::string params_str(const std::vector<Param>& ps) {
  std::string s = "(";
  for (size_t i = 0; i < ps.size(); ++i) s += (i ? ", " : "") + ps[i].name + ":" + ps[i].sort;
  return s + ")";
}

const char* op_str(CompareOp op) {
  switch (op) {
    case CompareOp::Le: return "<=";
    case CompareOp::Eq: return "=";
    case CompareOp::Ge: return ">=";
  }
  return "?";
}

}  // namespace

std::string to_string(const Atom& a) {
  std::string s = a.pred;
  if (!a.args.empty()) {
    s += "(";
    for (size_t i = 0; i < a.args.size(); ++i) s += (i ? "," : "") + a.args[i].name;
    s += ")";
  }
  return s;
}

std::string to_string(const Literal& l) { return (l.negative ? "-" : "") + to_string(l.atom); }

std::string to_string(const Condition& c) {
  return std::visit(
      [](const auto& n) -> std::string {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, LiteralCond>) {
          return to_string(n.lit);
        } else if constexpr (std::is_same_v<T, NotCond>) {
          if (n.body.size() == 1 && !std::holds_alternative<NotCond>(n.body[0].node))
            return "not " + to_string(n.body[0]);
          return "not (" + join_conds(n.body) + ")";
        } else if constexpr (std::is_same_v<T, CountCond>) {
          std::string s = "{" + to_string(n.templ);
          if (!n.guard.empty()) {
            s += " : ";
            for (size_t i = 0; i < n.guard.size(); ++i) s += (i ? ", " : "") + to_string(n.guard[i]);
          }
          return s + "} " + op_str(n.op) + " " + std::to_string(n.bound);
        } else if constexpr (std::is_same_v<T, ExternalCond>) {
          return "&" + to_string(n.atom);
        } else if constexpr (std::is_same_v<T, OccursCond>) {
          return "occurs " + (n.kind ? *n.kind : to_string(*n.action));
        } else {
          return n.lhs.name + (n.equal ? " = " : " != ") + n.rhs.name;
        }
      },
      c.node);
}

std::string pretty_print(const DomainSpec& dom) {
  std::ostringstream os;
  auto section = [&os](bool nonempty) {
    if (nonempty && os.tellp() > 0) os << "\n";
  };
  section(!dom.sorts.empty());
  for (const auto& s : dom.sorts) {
    os << "sort " << s.name;
    if (!s.members.empty()) {
      os << " = {";
      for (size_t i = 0; i < s.members.size(); ++i) os << (i ? ", " : "") << s.members[i];
      os << "}";
    }
    os << ".\n";
  }
  section(!dom.fluents.empty());
  for (const auto& f : dom.fluents) {
    os << "fluent " << f.name;
    if (!f.arg_sorts.empty()) {
      os << "(";
      for (size_t i = 0; i < f.arg_sorts.size(); ++i) os << (i ? ", " : "") << f.arg_sorts[i];
      os << ")";
    }
    if (f.observability == Observability::Partial) os << " partial";
    os << ".\n";
  }
  section(!dom.statics.empty() || !dom.externals.empty());
  auto relation = [&os](const char* kw, const RelationDecl& r) {
    os << kw << " " << r.name;
    if (r.arg_sorts.empty()) {
      os << "/" << r.arity;
    } else {
      os << "(";
      for (size_t i = 0; i < r.arg_sorts.size(); ++i) os << (i ? ", " : "") << r.arg_sorts[i];
      os << ")";
    }
    os << ".\n";
  };
  for (const auto& s : dom.statics) relation("static", s);
  for (const auto& e : dom.externals) relation("external", e);
  section(!dom.failures.empty());
  for (const auto& f : dom.failures)
    os << "failure " << f.name << params_str(f.params) << " when " << join_conds(f.body) << ".\n";
  for (const auto& a : dom.actions) {
    section(true);
    const char* kw = a.kind == ActionKind::Actuation ? "actuation"
                     : a.kind == ActionKind::Sensing ? "sensing"
                                                     : "communication";
    os << kw << " " << a.name << params_str(a.params) << "\n";
    for (const auto& cl : a.pre_clauses) os << "  pre " << join_conds(cl) << ";\n";
    for (const auto& e : a.effects) os << "  effect " << to_string(e) << ";\n";
    if (a.outcomes) {
      if (const auto* named = std::get_if<std::vector<NamedOutcome>>(&a.outcomes->alts)) {
        for (const auto& o : *named) {
          os << "  outcome " << o.name << ": ";
          for (size_t i = 0; i < o.lits.size(); ++i) os << (i ? ", " : "") << to_string(o.lits[i]);
          os << ";\n";
        }
      } else {
        const auto& r = std::get<RangedOutcome>(a.outcomes->alts);
        os << "  outcome one " << to_string(r.templ) << " over " << r.sort;
        if (!r.guard.empty()) os << " where " << join_conds(r.guard);
        os << ";\n";
      }
    }
  }
  section(!dom.constraints.empty());
  for (const auto& c : dom.constraints) {
    os << "constraint ";
    if (!c.label.empty()) os << c.label << ": ";
    os << join_conds(c.body) << ".\n";
  }
  section(!dom.weak.empty());
  for (const auto& w : dom.weak) {
    os << "weak ";
    if (!w.label.empty()) os << w.label << ": ";
    os << join_conds(w.body) << " [" << w.weight << "@" << w.level << "].\n";
  }
  return os.str();
}

}  // namespace cohap::adl

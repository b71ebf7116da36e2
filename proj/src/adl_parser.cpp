#include <cctype>
#include <set>
#include <sstream>

#include "cohap/adl.hpp"

namespace cohap::adl {

namespace {

std::string format_error(SourcePos pos, const std::string& msg,
                         const std::vector<std::string>& expected) {
  std::ostringstream os;
  if (pos.line > 0) os << pos.line << ":" << pos.col << ": ";
  os << msg;
  if (!expected.empty()) {
    os << " (expected ";
    for (size_t i = 0; i < expected.size(); ++i) os << (i ? ", " : "") << expected[i];
    os << ")";
  }
  return os.str();
}

enum class Tok { Ident, Int, Punct, End };

struct Token {
  Tok type = Tok::End;
  std::string text;
  SourcePos pos;
};

std::string unexpected(const Token& t) {
  return t.type == Tok::End ? "unexpected end of input" : "unexpected '" + t.text + "'";
}

std::vector<Token> lex(const std::string& src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  size_t i = 0;
  auto advance = [&](size_t n) {
    for (size_t k = 0; k < n; ++k) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == '%') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    SourcePos pos{line, col};
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) ||
                                src[j] == '_' || src[j] == '\''))
        ++j;
      out.push_back({Tok::Ident, src.substr(i, j - i), pos});
      advance(j - i);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      out.push_back({Tok::Int, src.substr(i, j - i), pos});
      advance(j - i);
      continue;
    }
    auto two = src.substr(i, 2);
    if (two == "!=" || two == "<=" || two == ">=") {
      out.push_back({Tok::Punct, two, pos});
      advance(2);
      continue;
    }
    static const std::string singles = "(),;:.{}[]@-&=/";
    if (singles.find(c) != std::string::npos) {
      out.push_back({Tok::Punct, std::string(1, c), pos});
      advance(1);
      continue;
    }
    throw ParseError(pos, std::string("unexpected character '") + c + "'");
  }
  out.push_back({Tok::End, "", {line, col}});
  return out;
}

const std::set<std::string> kTopKeywords = {"sort",     "fluent",     "static",
                                            "external", "actuation",  "sensing",
                                            "communication", "constraint", "weak",
                                            "failure"};

class Parser {
 public:
  explicit Parser(const std::string& text) : toks_(lex(text)) {}

  DomainSpec parse() {
    while (peek().type != Tok::End) declaration();
    resolve();
    return std::move(dom_);
  }

  // Entry point for standalone ground literals.
  GroundLiteral ground_literal() {
    bool neg = accept("-");
    auto name = ident();
    GroundLiteral gl{name, {}, neg};
    if (accept("(")) {
      if (!accept(")")) {
        do {
          const Token& t = next();
          if (t.type != Tok::Ident && t.type != Tok::Int)
            throw ParseError(t.pos, "expected constant", {"identifier"});
          gl.args.push_back(t.text);
        } while (accept(","));
        expect(")");
      }
    }
    if (peek().type != Tok::End) throw ParseError(peek().pos, "trailing input", {"end of literal"});
    return gl;
  }

 private:
  const Token& peek(size_t k = 0) const {
    return toks_[std::min(pos_ + k, toks_.size() - 1)];
  }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  bool is(const std::string& p, size_t k = 0) const {
    const Token& t = peek(k);
    return (t.type == Tok::Punct || t.type == Tok::Ident) && t.text == p;
  }
  bool accept(const std::string& p) {
    if (peek().type == Tok::Punct && peek().text == p) {
      next();
      return true;
    }
    return false;
  }
  bool accept_kw(const std::string& kw) {
    if (peek().type == Tok::Ident && peek().text == kw) {
      next();
      return true;
    }
    return false;
  }
  void expect(const std::string& p) {
    if (!accept(p)) throw ParseError(peek().pos, unexpected(peek()), {"'" + p + "'"});
  }
  void expect_kw(const std::string& kw) {
    if (!accept_kw(kw))
      throw ParseError(peek().pos, unexpected(peek()), {"'" + kw + "'"});
  }
  std::string ident() {
    if (peek().type != Tok::Ident)
      throw ParseError(peek().pos, unexpected(peek()), {"identifier"});
    return next().text;
  }
  int integer() {
    if (peek().type != Tok::Int)
      throw ParseError(peek().pos, unexpected(peek()), {"integer"});
    return std::stoi(next().text);
  }

  bool var_name(const std::string& s) const {
    if (is_variable_name(s)) return true;
    for (const auto& p : scope_)
      if (p.name == s) return true;
    return false;
  }

  Term term() {
    const Token& t = peek();
    if (t.type == Tok::Int) return {next().text, false};
    auto n = ident();
    return {n, var_name(n)};
  }

  Atom atom() {
    Atom a;
    a.pos = peek().pos;
    a.pred = ident();
    if (accept("(")) {
      if (!accept(")")) {
        do a.args.push_back(term());
        while (accept(","));
        expect(")");
      }
    }
    return a;
  }

  Literal literal() {
    Literal l;
    l.negative = accept("-");
    l.atom = atom();
    return l;
  }

  std::vector<Param> typed_params() {
    std::vector<Param> ps;
    if (!accept("(")) return ps;
    if (accept(")")) return ps;
    do {
      Param p;
      p.name = ident();
      expect(":");
      p.sort = ident();
      ps.push_back(p);
    } while (accept(","));
    expect(")");
    return ps;
  }

  Condition condition() {
    Condition c;
    c.pos = peek().pos;
    if (accept_kw("not")) {
      NotCond n;
      if (accept("(")) {
        n.body = condition_list();
        expect(")");
      } else {
        n.body.push_back(condition());
      }
      c.node = std::move(n);
      return c;
    }
    if (accept("{")) {
      CountCond cc;
      cc.templ = atom();
      if (accept(":")) {
        do cc.guard.push_back(atom());
        while (accept(","));
      }
      expect("}");
      if (accept("<="))
        cc.op = CompareOp::Le;
      else if (accept(">="))
        cc.op = CompareOp::Ge;
      else if (accept("="))
        cc.op = CompareOp::Eq;
      else
        throw ParseError(peek().pos, unexpected(peek()), {"'<='", "'='", "'>='"});
      cc.bound = integer();
      c.node = std::move(cc);
      return c;
    }
    if (accept("&")) {
      c.node = ExternalCond{atom()};
      return c;
    }
    if (accept_kw("occurs")) {
      OccursCond oc;
      const auto& t = peek();
      if (t.type == Tok::Ident &&
          (t.text == "actuation" || t.text == "sensing" || t.text == "communication") &&
          !is("(", 1)) {
        oc.kind = next().text;
      } else {
        oc.action = atom();
      }
      c.node = std::move(oc);
      return c;
    }
    if ((peek().type == Tok::Ident || peek().type == Tok::Int) && (is("=", 1) || is("!=", 1))) {
      CompareCond cmp;
      cmp.lhs = term();
      cmp.equal = accept("=");
      if (!cmp.equal) expect("!=");
      cmp.rhs = term();
      c.node = cmp;
      return c;
    }
    if (peek().type != Tok::Ident && !is("-"))
      throw ParseError(peek().pos, unexpected(peek()),
                       {"literal", "'not'", "'{'", "'&'", "'occurs'"});
    c.node = LiteralCond{literal()};
    return c;
  }

  std::vector<Condition> condition_list() {
    std::vector<Condition> cs;
    do cs.push_back(condition());
    while (accept(","));
    return cs;
  }

  std::string optional_label() {
    if (peek().type == Tok::Ident && is(":", 1) && !is("{")) {
      auto l = next().text;
      next();
      return l;
    }
    return {};
  }

  void declaration() {
    const Token& kw = peek();
    if (kw.type != Tok::Ident || !kTopKeywords.count(kw.text))
      throw ParseError(kw.pos, unexpected(kw),
                       {"sort", "fluent", "static", "external", "failure", "actuation",
                        "sensing", "communication", "constraint", "weak"});
    SourcePos pos = kw.pos;
    std::string k = next().text;
    scope_.clear();
    if (k == "sort") {
      SortDecl s;
      s.pos = pos;
      s.name = ident();
      if (accept("=")) {
        expect("{");
        if (!accept("}")) {
          do s.members.push_back(ident());
          while (accept(","));
          expect("}");
        }
      }
      expect(".");
      dom_.sorts.push_back(std::move(s));
    } else if (k == "fluent") {
      FluentSchema f;
      f.pos = pos;
      f.name = ident();
      if (accept("(")) {
        if (!accept(")")) {
          do f.arg_sorts.push_back(ident());
          while (accept(","));
          expect(")");
        }
      }
      if (accept_kw("partial")) f.observability = Observability::Partial;
      expect(".");
      dom_.fluents.push_back(std::move(f));
    } else if (k == "static" || k == "external") {
      RelationDecl r;
      r.pos = pos;
      r.name = ident();
      if (accept("(")) {
        do r.arg_sorts.push_back(ident());
        while (accept(","));
        expect(")");
        r.arity = static_cast<int>(r.arg_sorts.size());
      } else {
        expect("/");
        r.arity = integer();
      }
      expect(".");
      (k == "static" ? dom_.statics : dom_.externals).push_back(std::move(r));
    } else if (k == "failure") {
      FailureRule f;
      f.pos = pos;
      f.name = ident();
      f.params = typed_params();
      scope_ = f.params;
      expect_kw("when");
      f.body = condition_list();
      expect(".");
      dom_.failures.push_back(std::move(f));
    } else if (k == "constraint") {
      ConstraintRule r;
      r.pos = pos;
      r.label = optional_label();
      r.body = condition_list();
      expect(".");
      dom_.constraints.push_back(std::move(r));
    } else if (k == "weak") {
      WeakConstraint w;
      w.pos = pos;
      w.label = optional_label();
      w.body = condition_list();
      expect("[");
      w.weight = integer();
      expect("@");
      w.level = integer();
      expect("]");
      expect(".");
      dom_.weak.push_back(std::move(w));
    } else {
      action(k, pos);
    }
  }

  void action(const std::string& k, SourcePos pos) {
    ActionSchema a;
    a.pos = pos;
    a.kind = k == "actuation" ? ActionKind::Actuation
             : k == "sensing" ? ActionKind::Sensing
                              : ActionKind::CommDet;
    a.name = ident();
    a.params = typed_params();
    scope_ = a.params;
    std::vector<NamedOutcome> named;
    std::optional<RangedOutcome> ranged;
    while (true) {
      if (accept_kw("pre")) {
        a.pre_clauses.push_back(condition_list());
        expect(";");
      } else if (accept_kw("effect")) {
        a.effects.push_back(literal());
        expect(";");
      } else if (is("outcome")) {
        SourcePos opos = next().pos;
        if (accept_kw("one")) {
          if (ranged || !named.empty())
            throw ParseError(opos, "ranged outcome must be the only outcome clause");
          RangedOutcome r;
          r.templ = literal();
          expect_kw("over");
          r.sort = ident();
          for (const auto& t : r.templ.atom.args) {
            if (!t.is_var) continue;
            bool is_param = false;
            for (const auto& p : a.params) is_param |= p.name == t.name;
            if (is_param) continue;
            if (!r.var.empty() && r.var != t.name)
              throw ParseError(opos, "ranged outcome template has more than one free variable");
            r.var = t.name;
          }
          if (r.var.empty())
            throw ParseError(opos, "ranged outcome template has no free variable");
          if (accept_kw("where")) {
            scope_.push_back({r.var, r.sort});
            r.guard = condition_list();
            scope_.pop_back();
          }
          expect(";");
          ranged = std::move(r);
        } else {
          if (ranged) throw ParseError(opos, "ranged outcome must be the only outcome clause");
          NamedOutcome o;
          o.name = ident();
          expect(":");
          do o.lits.push_back(literal());
          while (accept(","));
          expect(";");
          named.push_back(std::move(o));
        }
      } else {
        break;
      }
    }
    if (peek().type != Tok::End &&
        !(peek().type == Tok::Ident && kTopKeywords.count(peek().text)))
      throw ParseError(peek().pos, unexpected(peek()),
                       {"pre", "effect", "outcome", "declaration"});
    if (ranged)
      a.outcomes = OutcomeSet{std::move(*ranged)};
    else if (!named.empty())
      a.outcomes = OutcomeSet{std::move(named)};
    if (k == "communication" && a.outcomes) a.kind = ActionKind::CommNondet;
    dom_.actions.push_back(std::move(a));
  }

  // ---- name resolution ----

  void check_sort(const std::string& s, SourcePos pos) {
    if (!dom_.find_sort(s)) throw ParseError(pos, "unknown sort '" + s + "'");
  }

  void resolve_atom(Atom& a, bool allow_sort, bool fluent_only = false) {
    auto arity = static_cast<int>(a.args.size());
    auto mismatch = [&](int want) {
      throw ParseError(a.pos, "arity mismatch for '" + a.pred + "': expected " +
                                  std::to_string(want) + ", got " + std::to_string(arity));
    };
    if (const auto* f = dom_.find_fluent(a.pred)) {
      if (static_cast<int>(f->arg_sorts.size()) != arity) mismatch(static_cast<int>(f->arg_sorts.size()));
      a.category = AtomCategory::Fluent;
      return;
    }
    if (fluent_only) throw ParseError(a.pos, "unknown fluent '" + a.pred + "'");
    if (const auto* s = dom_.find_static(a.pred)) {
      if (s->arity != arity) mismatch(s->arity);
      a.category = AtomCategory::Static;
      return;
    }
    if (const auto* fr = dom_.find_failure(a.pred)) {
      if (static_cast<int>(fr->params.size()) != arity) mismatch(static_cast<int>(fr->params.size()));
      a.category = AtomCategory::Failure;
      return;
    }
    if (allow_sort && dom_.find_sort(a.pred)) {
      if (arity != 1) mismatch(1);
      a.category = AtomCategory::Sort;
      return;
    }
    throw ParseError(a.pos, "unknown fluent or relation '" + a.pred + "'");
  }

  void resolve_conds(std::vector<Condition>& cs) {
    for (auto& c : cs) resolve_cond(c);
  }

  void resolve_cond(Condition& c) {
    std::visit(
        [&](auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, LiteralCond>) {
            resolve_atom(n.lit.atom, true);
            if (n.lit.negative && n.lit.atom.category != AtomCategory::Fluent)
              throw ParseError(n.lit.atom.pos, "classical negation only applies to fluents");
          } else if constexpr (std::is_same_v<T, NotCond>) {
            resolve_conds(n.body);
          } else if constexpr (std::is_same_v<T, CountCond>) {
            resolve_atom(n.templ, false);
            if (n.templ.category == AtomCategory::Static)
              throw ParseError(n.templ.pos, "count template must be a fluent or failure atom");
            for (auto& g : n.guard) {
              resolve_atom(g, true);
              if (g.category == AtomCategory::Fluent || g.category == AtomCategory::Failure)
                throw ParseError(g.pos, "count guard must be a static relation or sort");
            }
          } else if constexpr (std::is_same_v<T, ExternalCond>) {
            const auto* e = dom_.find_external(n.atom.pred);
            if (!e) throw ParseError(n.atom.pos, "unknown external '" + n.atom.pred + "'");
            if (e->arity != static_cast<int>(n.atom.args.size()))
              throw ParseError(n.atom.pos, "arity mismatch for external '" + n.atom.pred + "'");
          } else if constexpr (std::is_same_v<T, OccursCond>) {
            if (n.action) {
              const auto* a = dom_.find_action(n.action->pred);
              if (!a) throw ParseError(n.action->pos, "unknown action '" + n.action->pred + "'");
              if (a->params.size() != n.action->args.size())
                throw ParseError(n.action->pos,
                                 "arity mismatch for action '" + n.action->pred + "'");
            }
          }
        },
        c.node);
  }

  template <class T>
  void check_unique(const std::vector<T>& v, const char* what) {
    std::set<std::string> seen;
    for (const auto& x : v)
      if (!seen.insert(x.name).second)
        throw ParseError(x.pos, std::string("duplicate ") + what + " '" + x.name + "'");
  }

  void resolve() {
    check_unique(dom_.sorts, "sort");
    check_unique(dom_.fluents, "fluent");
    check_unique(dom_.statics, "static");
    check_unique(dom_.externals, "external");
    check_unique(dom_.failures, "failure");
    check_unique(dom_.actions, "action");
    {
      std::set<std::string> names;
      auto add = [&](const std::string& n, SourcePos p) {
        if (!names.insert(n).second) throw ParseError(p, "duplicate declaration '" + n + "'");
      };
      for (const auto& x : dom_.fluents) add(x.name, x.pos);
      for (const auto& x : dom_.statics) add(x.name, x.pos);
      for (const auto& x : dom_.failures) add(x.name, x.pos);
    }
    for (const auto& s : dom_.sorts) {
      std::set<std::string> m;
      for (const auto& x : s.members)
        if (!m.insert(x).second) throw ParseError(s.pos, "duplicate member '" + x + "' in sort " + s.name);
    }
    for (const auto& f : dom_.fluents)
      for (const auto& s : f.arg_sorts) check_sort(s, f.pos);
    for (const auto& r : dom_.statics)
      for (const auto& s : r.arg_sorts) check_sort(s, r.pos);
    for (const auto& r : dom_.externals)
      for (const auto& s : r.arg_sorts) check_sort(s, r.pos);
    for (auto& f : dom_.failures) {
      for (const auto& p : f.params) check_sort(p.sort, f.pos);
      resolve_conds(f.body);
    }
    for (auto& a : dom_.actions) {
      for (const auto& p : a.params) check_sort(p.sort, a.pos);
      for (auto& cl : a.pre_clauses) resolve_conds(cl);
      for (auto& e : a.effects) resolve_atom(e.atom, false, true);
      if (a.outcomes) {
        if (auto* named = std::get_if<std::vector<NamedOutcome>>(&a.outcomes->alts)) {
          for (auto& o : *named)
            for (auto& l : o.lits) resolve_atom(l.atom, false, true);
        } else {
          auto& r = std::get<RangedOutcome>(a.outcomes->alts);
          check_sort(r.sort, a.pos);
          resolve_atom(r.templ.atom, false, true);
          resolve_conds(r.guard);
        }
      }
    }
    for (auto& r : dom_.constraints) resolve_conds(r.body);
    for (auto& w : dom_.weak) resolve_conds(w.body);
  }

  std::vector<Token> toks_;
  size_t pos_ = 0;
  DomainSpec dom_;
  std::vector<Param> scope_;
};

}  // namespace

ParseError::ParseError(SourcePos pos, const std::string& msg, std::vector<std::string> expected)
    : std::runtime_error(format_error(pos, msg, expected)),
      pos_(pos),
      msg_(msg),
      expected_(std::move(expected)) {}

bool is_variable_name(const std::string& s) {
  return !s.empty() && std::isupper(static_cast<unsigned char>(s[0]));
}

const char* to_string(ActionKind k) {
  switch (k) {
    case ActionKind::Actuation: return "actuation";
    case ActionKind::Sensing: return "sensing";
    case ActionKind::CommDet: return "commDet";
    case ActionKind::CommNondet: return "commNondet";
  }
  return "?";
}

bool is_decision(ActionKind k) { return k == ActionKind::Sensing || k == ActionKind::CommNondet; }
bool is_communication(ActionKind k) {
  return k == ActionKind::CommDet || k == ActionKind::CommNondet;
}

namespace {
template <class T>
const T* find_named(const std::vector<T>& v, const std::string& n) {
  for (const auto& x : v)
    if (x.name == n) return &x;
  return nullptr;
}
}  // namespace

const SortDecl* DomainSpec::find_sort(const std::string& n) const { return find_named(sorts, n); }
const FluentSchema* DomainSpec::find_fluent(const std::string& n) const {
  return find_named(fluents, n);
}
const RelationDecl* DomainSpec::find_static(const std::string& n) const {
  return find_named(statics, n);
}
const RelationDecl* DomainSpec::find_external(const std::string& n) const {
  return find_named(externals, n);
}
const FailureRule* DomainSpec::find_failure(const std::string& n) const {
  return find_named(failures, n);
}
const ActionSchema* DomainSpec::find_action(const std::string& n) const {
  return find_named(actions, n);
}

DomainSpec parse_domain(const std::string& text) { return Parser(text).parse(); }

GroundLiteral parse_ground_literal(const std::string& text) {
  return Parser(text).ground_literal();
}

std::string to_string(const GroundLiteral& l) {
  std::string s = l.negative ? "-" : "";
  s += l.fluent;
  if (!l.args.empty()) {
    s += "(";
    for (size_t i = 0; i < l.args.size(); ++i) s += (i ? "," : "") + l.args[i];
    s += ")";
  }
  return s;
}

}  // namespace cohap::adl

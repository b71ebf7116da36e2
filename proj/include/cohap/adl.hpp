// ADL-H: the action description language used by the planner.
//
// A domain declares sorts, fluents, static relations, external predicates,
// failure rules, action schemas (actuation / sensing / communication), hard
// constraints and weak constraints. An instance (JSON) populates the sorts,
// static relations, initial knowledge and goal. See docs/adlh.md.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace cohap::adl {

struct SourcePos {
  int line = 0;
  int col = 0;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(SourcePos pos, const std::string& msg,
             std::vector<std::string> expected = {});

  SourcePos pos() const { return pos_; }
  const std::string& message() const { return msg_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  SourcePos pos_;
  std::string msg_;
  std::vector<std::string> expected_;
};

struct Term {
  std::string name;
  bool is_var = false;

  bool operator==(const Term&) const = default;
};

enum class AtomCategory : std::uint8_t { Unresolved, Fluent, Static, Failure, Sort };

struct Atom {
  std::string pred;
  std::vector<Term> args;
  AtomCategory category = AtomCategory::Unresolved;
  SourcePos pos;

  bool operator==(const Atom& o) const {
    return pred == o.pred && args == o.args && category == o.category;
  }
};

/// A possibly classically negated atom ("-f").
struct Literal {
  Atom atom;
  bool negative = false;

  bool operator==(const Literal&) const = default;
};

enum class CompareOp : std::uint8_t { Le, Eq, Ge };

enum class ActionKind : std::uint8_t { Actuation, Sensing, CommDet, CommNondet };

const char* to_string(ActionKind k);
bool is_decision(ActionKind k);
bool is_communication(ActionKind k);

struct Condition;

struct LiteralCond {
  Literal lit;
  bool operator==(const LiteralCond&) const = default;
};

/// Default negation: holds iff the conjunction `body` does not hold.
struct NotCond {
  std::vector<Condition> body;
  bool operator==(const NotCond&) const;
};

/// `{ templ : guard } op bound` counts template atoms known true.
struct CountCond {
  Atom templ;
  std::vector<Atom> guard;
  CompareOp op = CompareOp::Le;
  int bound = 0;
  bool operator==(const CountCond&) const = default;
};

struct ExternalCond {
  Atom atom;
  bool operator==(const ExternalCond&) const = default;
};

/// `occurs <kind>` or `occurs <action>(args)`; only meaningful in constraint
/// and weak-constraint bodies.
struct OccursCond {
  std::optional<std::string> kind;  // "actuation" | "sensing" | "communication"
  std::optional<Atom> action;
  bool operator==(const OccursCond&) const = default;
};

struct CompareCond {
  Term lhs;
  Term rhs;
  bool equal = true;
  bool operator==(const CompareCond&) const = default;
};

struct Condition {
  std::variant<LiteralCond, NotCond, CountCond, ExternalCond, OccursCond, CompareCond> node;
  SourcePos pos;

  bool operator==(const Condition& o) const { return node == o.node; }
};

inline bool NotCond::operator==(const NotCond& o) const { return body == o.body; }

struct SortDecl {
  std::string name;
  std::vector<std::string> members;  // domain-level members (usually empty)
  SourcePos pos;
  bool operator==(const SortDecl& o) const { return name == o.name && members == o.members; }
};

enum class Observability : std::uint8_t { Full, Partial };

struct FluentSchema {
  std::string name;
  std::vector<std::string> arg_sorts;
  Observability observability = Observability::Full;
  SourcePos pos;
  bool operator==(const FluentSchema& o) const {
    return name == o.name && arg_sorts == o.arg_sorts && observability == o.observability;
  }
};

/// Static or external relation. Statics may be typed (`static loc(part, region).`)
/// instead of `name/arity`; typed tuples are sort-checked in instances.
struct RelationDecl {
  std::string name;
  int arity = 0;
  std::vector<std::string> arg_sorts;  // empty when declared as name/arity
  SourcePos pos;
  bool operator==(const RelationDecl& o) const {
    return name == o.name && arity == o.arity && arg_sorts == o.arg_sorts;
  }
};

struct Param {
  std::string name;
  std::string sort;
  bool operator==(const Param&) const = default;
};

struct NamedOutcome {
  std::string name;
  std::vector<Literal> lits;
  bool operator==(const NamedOutcome&) const = default;
};

/// Exactly one instance of `templ` holds, for `var` ranging over `sort`
/// (optionally restricted by a static guard).
struct RangedOutcome {
  Literal templ;
  std::string var;
  std::string sort;
  std::vector<Condition> guard;
  bool operator==(const RangedOutcome&) const = default;
};

struct OutcomeSet {
  std::variant<std::vector<NamedOutcome>, RangedOutcome> alts;
  bool operator==(const OutcomeSet&) const = default;
};

struct ActionSchema {
  std::string name;
  ActionKind kind = ActionKind::Actuation;
  std::vector<Param> params;
  std::vector<std::vector<Condition>> pre_clauses;  // one conjunction per `pre` clause
  std::vector<Literal> effects;
  std::optional<OutcomeSet> outcomes;
  SourcePos pos;

  bool operator==(const ActionSchema& o) const {
    return name == o.name && kind == o.kind && params == o.params &&
           pre_clauses == o.pre_clauses && effects == o.effects && outcomes == o.outcomes;
  }
};

struct ConstraintRule {
  std::string label;  // may be empty
  std::vector<Condition> body;
  SourcePos pos;
  bool operator==(const ConstraintRule& o) const { return label == o.label && body == o.body; }
};

struct WeakConstraint {
  std::string label;
  std::vector<Condition> body;
  int weight = 1;
  int level = 1;
  SourcePos pos;
  bool operator==(const WeakConstraint& o) const {
    return label == o.label && body == o.body && weight == o.weight && level == o.level;
  }
};

struct FailureRule {
  std::string name;
  std::vector<Param> params;
  std::vector<Condition> body;
  SourcePos pos;
  bool operator==(const FailureRule& o) const {
    return name == o.name && params == o.params && body == o.body;
  }
};

struct DomainSpec {
  std::vector<SortDecl> sorts;
  std::vector<FluentSchema> fluents;
  std::vector<RelationDecl> statics;
  std::vector<RelationDecl> externals;
  std::vector<FailureRule> failures;
  std::vector<ActionSchema> actions;
  std::vector<ConstraintRule> constraints;
  std::vector<WeakConstraint> weak;

  bool operator==(const DomainSpec&) const = default;

  const SortDecl* find_sort(const std::string& n) const;
  const FluentSchema* find_fluent(const std::string& n) const;
  const RelationDecl* find_static(const std::string& n) const;
  const RelationDecl* find_external(const std::string& n) const;
  const FailureRule* find_failure(const std::string& n) const;
  const ActionSchema* find_action(const std::string& n) const;
};

struct GroundLiteral {
  std::string fluent;
  std::vector<std::string> args;
  bool negative = false;
  bool operator==(const GroundLiteral&) const = default;
  auto operator<=>(const GroundLiteral&) const = default;
};

std::string to_string(const GroundLiteral& l);

struct InstanceSpec {
  std::string name;
  std::map<std::string, std::vector<std::string>> objects;  // sort -> constants
  std::map<std::string, std::vector<std::vector<std::string>>> statics;
  std::vector<GroundLiteral> init;
  std::vector<GroundLiteral> goal;
  std::string workspace;  // path reference, may be empty
  std::map<std::string, int> params;  // generator parameters (U, P, R, seed, ...)
};

DomainSpec parse_domain(const std::string& text);

/// Parses a ground literal such as `attached(leg1,top1,c1)` or `-free(left)`.
GroundLiteral parse_ground_literal(const std::string& text);

/// Instance JSON; type-checked against `dom`.
InstanceSpec parse_instance(const std::string& text, const DomainSpec& dom);
std::string instance_to_json(const InstanceSpec& inst);

enum class Severity : std::uint8_t { Warning, Error };

struct Diagnostic {
  Severity severity = Severity::Warning;
  SourcePos pos;
  std::string message;
};

std::vector<Diagnostic> validate(const DomainSpec& dom);

/// Instance-aware checks (e.g. degenerate ranged outcomes over 1-member sorts).
std::vector<Diagnostic> validate(const DomainSpec& dom, const InstanceSpec& inst);

std::string pretty_print(const DomainSpec& dom);
std::string to_string(const Condition& c);
std::string to_string(const Literal& l);
std::string to_string(const Atom& a);

/// Variables are uppercase-initial identifiers, or names bound as parameters.
bool is_variable_name(const std::string& s);

}  // namespace cohap::adl

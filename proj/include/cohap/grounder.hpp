// Grounding of ADL-H domains and the belief-state transition semantics.
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cohap/adl.hpp"
#include "cohap/cost.hpp"
#include "cohap/feasibility.hpp"

namespace cohap::ground {

using AtomId = std::int32_t;

/// Raised for grounding failures and for hard state constraint violations.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Truth : std::uint8_t { False, True, Unknown };

/// Three-valued assignment over ground fluents, stored as two bitsets
/// (known, value). Unknown atoms always have value bit 0, so equality and
/// hashing work on the raw words. `step` is bookkeeping and not part of
/// equality.
class BeliefState {
 public:
  BeliefState() = default;
  explicit BeliefState(std::size_t n_atoms);

  Truth get(AtomId a) const;
  void set(AtomId a, Truth t);
  bool is_true(AtomId a) const { return bit(value_off_, a); }
  bool is_false(AtomId a) const { return bit(0, a) && !bit(value_off_, a); }
  bool known(AtomId a) const { return bit(0, a); }
  std::size_t size() const { return n_; }

  const std::vector<std::uint64_t>& words() const { return words_; }
  std::size_t value_offset() const { return value_off_; }
  std::size_t hash() const;

  bool operator==(const BeliefState& o) const { return words_ == o.words_; }

  int step = 0;

 private:
  bool bit(std::size_t off, AtomId a) const {
    return (words_[off + (a >> 6)] >> (a & 63)) & 1u;
  }

  std::size_t n_ = 0;
  std::size_t value_off_ = 0;
  std::vector<std::uint64_t> words_;
};

struct BeliefHash {
  std::size_t operator()(const BeliefState& s) const { return s.hash(); }
};

/// Ground condition after static folding.
struct GCond {
  enum class Op : std::uint8_t { Const, Lit, Not, And, Or, Count };
  Op op = Op::Const;
  bool value = true;     // Const
  AtomId atom = -1;      // Lit
  bool positive = true;  // Lit: known true (positive) or known false
  std::vector<GCond> kids;
  adl::CompareOp cmp = adl::CompareOp::Le;  // Count
  int bound = 0;
  int offset = 0;  // Count: kids folded to constant true

  static GCond constant(bool v) {
    GCond c;
    c.value = v;
    return c;
  }
  bool is_const() const { return op == Op::Const; }
};

struct GroundLit {
  AtomId atom = -1;
  bool positive = true;
  bool operator==(const GroundLit&) const = default;
};

struct Outcome {
  std::string label;
  std::vector<GroundLit> lits;
  /// Subset of `lits` that distinguishes this outcome (see consistent_outcomes).
  std::vector<GroundLit> observed;
};

/// Ground weak constraint attached to an action (or to every step).
struct WeakTerm {
  std::string label;
  int level = 1;
  int weight = 1;
  int base = 0;  // instances that hold in every state
  std::vector<GCond> instances;
};

/// Sparse word masks for the literal part of a precondition.
struct PreMask {
  std::vector<std::pair<std::uint32_t, std::uint64_t>> known;   // must be known
  std::vector<std::pair<std::uint32_t, std::uint64_t>> ones;    // value bit 1
  std::vector<std::pair<std::uint32_t, std::uint64_t>> zeros;   // value bit 0
};

struct GroundAction {
  int id = -1;
  int schema = -1;
  std::string name;
  std::vector<std::string> args;
  adl::ActionKind kind = adl::ActionKind::Actuation;
  PreMask mask;
  GCond residual = GCond::constant(true);  // precondition minus `mask`
  bool dead = false;                       // precondition statically false
  std::vector<GroundLit> effects;
  std::vector<Outcome> outcomes;
  std::vector<WeakTerm> weak;

  bool decision() const { return adl::is_decision(kind); }
  std::string to_string() const;
};

struct StateConstraint {
  std::string text;
  GCond cond;
};

struct GroundStats {
  std::size_t atoms = 0;
  std::size_t actions = 0;
  std::size_t live_actions = 0;
  long external_calls = 0;
  double seconds = 0.0;
};

struct GroundOptions {
  std::size_t atom_budget = 2'000'000;
  bool safety_strict = true;
  /// Injected as unsafeRegion/1 when the domain declares that static.
  std::vector<std::string> unsafe_regions;
  /// Weight overrides for weak constraints, keyed by label.
  std::map<std::string, int> weak_weights;
};

class GroundProblem {
 public:
  const adl::DomainSpec& domain() const { return *dom_; }
  const adl::InstanceSpec& instance() const { return *inst_; }

  std::size_t atom_count() const { return atom_names_.size(); }
  const std::string& atom_name(AtomId a) const { return atom_names_[a]; }
  bool partial(AtomId a) const { return partial_[a]; }
  std::optional<AtomId> find_atom(const std::string& fluent,
                                  const std::vector<std::string>& args) const;
  AtomId atom(const std::string& ground_literal_text) const;

  const std::vector<GroundAction>& actions() const { return actions_; }
  const GroundAction& action(int id) const { return actions_[id]; }
  std::optional<int> find_action(const std::string& name, const std::vector<std::string>& args) const;

  const BeliefState& initial() const { return init_; }
  const std::vector<GroundLit>& goal() const { return goal_; }
  const std::vector<StateConstraint>& state_constraints() const { return state_constraints_; }
  const GroundStats& stats() const { return stats_; }

  bool static_holds(const std::string& rel, const std::vector<std::string>& args) const;
  /// Static tuples after injection of workspace facts.
  const std::map<std::string, std::vector<std::vector<std::string>>>& statics() const { return statics_; }
  const std::vector<std::string>& members(const std::string& sort) const { return sort_members_.at(sort); }
  /// Ground failure atom, e.g. failure_holds("reachabilityFail", {"left","leg2"}, s).
  bool failure_holds(const std::string& name, const std::vector<std::string>& args,
                     const BeliefState& s) const;

  bool holds(const GCond& c, const BeliefState& s) const;
  bool pre_holds(const GroundAction& a, const BeliefState& s) const;
  bool goal_reached(const BeliefState& s) const;

  /// Indices of outcomes consistent with `s`, in declared order. Observations
  /// are the literals on partially observable fluents that not every outcome
  /// shares; the rest are effects of the response.
  std::vector<int> consistent_outcomes(const BeliefState& s, const GroundAction& a) const;

  /// Ids of applicable actions in the global order. Decision actions need
  /// at least two consistent outcomes.
  std::vector<int> applicable(const BeliefState& s) const;

  /// Applies effects (or outcome `o`), increments step and checks the hard
  /// state constraints; throws DomainError on violation.
  BeliefState successor(const BeliefState& s, const GroundAction& a, std::optional<int> o) const;

  /// Weak cost of executing `a` in `s`.
  WeightedCost step_cost(const BeliefState& s, const GroundAction& a) const;

  /// Known atoms, e.g. "free(left) -humanHolding".
  std::string describe(const BeliefState& s) const;

 private:
  friend class Grounder;

  std::shared_ptr<const adl::DomainSpec> dom_;
  std::shared_ptr<const adl::InstanceSpec> inst_;
  std::vector<std::string> atom_names_;
  std::vector<bool> partial_;
  std::map<std::string, std::pair<AtomId, std::vector<std::size_t>>> fluent_index_;  // base, strides
  std::map<std::string, std::pair<std::string, std::size_t>> const_index_;          // sort, position
  std::map<std::string, std::vector<std::string>> sort_members_;
  std::map<std::string, std::vector<std::vector<std::string>>> statics_;
  std::map<std::string, GCond> failures_;  // "name(a,b)" -> condition
  std::vector<GroundAction> actions_;
  std::vector<int> live_;
  std::map<std::string, int> action_index_;
  std::vector<StateConstraint> state_constraints_;
  std::vector<WeakTerm> step_weak_;  // weak constraints without `occurs`
  BeliefState init_;
  std::vector<GroundLit> goal_;
  GroundStats stats_;
};

GroundProblem ground(const adl::DomainSpec& dom, const adl::InstanceSpec& inst,
                     feas::FeasibilityOracle& fx, const GroundOptions& opt = {});

}  // namespace cohap::ground

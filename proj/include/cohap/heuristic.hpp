// Admissible distance estimates for branch search.
#pragma once

#include <climits>
#include <cstdint>
#include <vector>

#include "cohap/grounder.hpp"

namespace cohap::plan {

/// LM-cut over the delete relaxation of the belief problem. Facts are
/// "atom known true" and "atom known false"; each outcome of a decision
/// action is its own operator; residual (non-literal) preconditions are
/// dropped. Dropping preconditions and deletes only relaxes, so the value
/// never exceeds the true number of remaining steps.
class LmCut {
 public:
  static constexpr int kDeadEnd = INT_MAX;

  explicit LmCut(const ground::GroundProblem& p);

  /// Per-thread working memory.
  struct Scratch {
    std::vector<int> hmax;
    std::vector<int> cost;
    std::vector<int> unsat;
    std::vector<int> pcf;
    std::vector<char> in_goal_zone;
    std::vector<char> reached;
    std::vector<int> stack;
    std::vector<std::vector<int>> buckets;
    std::vector<int> cut;
    std::vector<char> in_cut;
  };

  int operator()(const ground::BeliefState& s, Scratch& w) const;

  std::size_t operator_count() const { return ops_.size(); }

 private:
  struct Op {
    std::vector<int> pre;
    std::vector<int> add;
  };
  int fact(ground::AtomId a, bool value) const { return 2 * a + (value ? 0 : 1); }
  void hmax(const ground::BeliefState& s, Scratch& w) const;

  int n_facts_ = 0;
  int true_fact_ = 0;  // holds in every state
  int goal_fact_ = 0;
  std::vector<Op> ops_;  // last op is the goal operator
  std::vector<std::vector<int>> pre_of_;  // fact -> ops with it as precondition
  std::vector<std::vector<int>> add_of_;  // fact -> ops adding it
};

}  // namespace cohap::plan

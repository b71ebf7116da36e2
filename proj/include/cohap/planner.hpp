// Branch planning and conditional plan tree expansion.
#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cohap/cost.hpp"
#include "cohap/grounder.hpp"
#include "cohap/heuristic.hpp"
#include "cohap/plantree.hpp"

namespace cohap::plan {

struct PlannerConfig {
  int max_horizon = 30;
  std::size_t atom_budget = 2'000'000;
  int workers = 1;
  std::map<std::string, int> weak_weights;  // by weak-constraint label
  bool safety_strict = true;

  ground::GroundOptions ground_options() const;
};

struct Step {
  int action = -1;
  std::optional<int> outcome;  // index into the action's outcomes
  bool operator==(const Step&) const = default;
};

struct Branch {
  std::vector<Step> prefix;
  ground::BeliefState terminal;
  WeightedCost cost;
  int horizon = 0;
};

/// No goal-reaching extension within the horizon. `prefix` lists the steps
/// leading to the failing state, e.g. {"askHelp(leg2,top1,c2)/decline"}.
class Unsolvable : public std::runtime_error {
 public:
  Unsolvable(std::vector<std::string> prefix, int max_horizon);
  const std::vector<std::string>& prefix() const { return prefix_; }
  int max_horizon() const { return max_horizon_; }

 private:
  std::vector<std::string> prefix_;
  int max_horizon_;
};

struct PlannerStats {
  long searches = 0;
  long cache_hits = 0;
  long states = 0;  // states generated by all searches
  long pruned = 0;  // successors cut off by the distance bound
};

class Planner {
 public:
  Planner(const ground::GroundProblem& p, PlannerConfig cfg);

  /// Minimal-horizon, then minimal-cost extension of `fixed`; cost-ties go to
  /// the first branch in action/outcome order. Throws Unsolvable.
  Branch plan_branch(const Branch& fixed);

  /// Root branch plus one planned subtree per unexplored outcome of every
  /// decision node. Node ids are preorder. Throws Unsolvable.
  tree::PlanTree expand_tree();

  PlannerStats stats() const;
  std::string step_label(const Step& s) const;

  struct Suffix {
    std::vector<Step> steps;
    WeightedCost cost;
  };
  /// Optimal suffix from `s` with at most `budget` steps; cached per state.
  std::optional<Suffix> search(const ground::BeliefState& s, int budget);

 private:
  std::optional<Suffix> search_uncached(const ground::BeliefState& s, int budget, PlannerStats& st);

  struct CacheEntry {
    std::optional<Suffix> result;
    int budget = -1;  // largest budget searched without success
  };

  const ground::GroundProblem& p_;
  PlannerConfig cfg_;
  LmCut h_;
  mutable std::mutex mu_;
  std::unordered_map<ground::BeliefState, CacheEntry, ground::BeliefHash> cache_;
  PlannerStats stats_;
};

struct SolveResult {
  tree::PlanTree tree;
  tree::Metrics metrics;
  tree::Timings timings;
  ground::GroundStats ground;
  PlannerStats planner;
};

/// Parse, ground, expand and measure. `workspace_json` may be empty when the
/// domain declares no externals.
SolveResult solve(const std::string& domain_text, const std::string& instance_text,
                  const std::string& workspace_json, const PlannerConfig& cfg);

}  // namespace cohap::plan

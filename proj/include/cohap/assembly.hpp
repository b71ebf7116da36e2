// Table-assembly instance families and the benchmark sweep harness.
#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cohap/adl.hpp"
#include "cohap/feasibility.hpp"
#include "cohap/planner.hpp"

namespace cohap::assembly {

inline constexpr const char* kDomainPath = "data/assembly.adlh";
inline constexpr const char* kWorkspacePath = "data/bench.json";

/// Contents of data/assembly.adlh, embedded at build time.
const std::string& domain_text();

/// Movable parts are legs and feet; top1 is always present on top of them.
/// Dangerous parts are feet first, then legs, and sit in the shared region.
/// Of the remaining parts the first R go to robotOnly, the next P to
/// humanOnly, the rest to shared.
struct Params {
  int legs = 2;
  int feet = 1;
  int U = 1;
  int P = 1;
  int R = 1;
  unsigned seed = 1;

  int parts() const { return legs + feet; }
  /// n movable parts split into floor(n/2) feet and the rest legs.
  static Params with_parts(int n, int U, int P, int R, unsigned seed);
};

class ParamsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The three-region bench: robotOnly | shared | wall | humanOnly.
feas::Workspace canonical_workspace();

/// Deterministic for given params; goal attaches every leg to top1 and every
/// foot to its leg. Throws ParamsError.
adl::InstanceSpec generate_instance(const Params& p);

/// The baseline scenario: leg1 robot-only, leg2 human-only, foot1 dangerous.
inline adl::InstanceSpec default_instance() { return generate_instance(Params{}); }

enum class Axis { U, P, R };
Axis parse_axis(const std::string& s);

/// Params of a sweep point: value k on `axis`, k+1 movable parts (k+2 with the
/// top), other axes 0.
Params sweep_params(Axis axis, int k, unsigned seed);

struct SweepRow {
  std::string inst;
  Params params;
  bool solved = false;
  std::string error;  // Unsolvable or other failure
  tree::Metrics metrics;
  tree::Timings timings;
  std::vector<tree::Violation> violations;
  std::string csv() const;
};

/// One solved instance per k in [lo, hi]. plan_s is the minimum over
/// `repeat` runs. `on_row` (optional) sees rows as they complete.
std::vector<SweepRow> bench_sweep(Axis axis, int lo, int hi, const plan::PlannerConfig& cfg,
                                  unsigned seed = 1, int repeat = 3,
                                  const std::function<void(const SweepRow&)>& on_row = {});

/// Per-instance pipeline used by the sweep; also validates the tree.
SweepRow run_instance(const std::string& name, const Params& p, const plan::PlannerConfig& cfg, int repeat,
                      tree::PlanTree* out_tree = nullptr);

}  // namespace cohap::assembly

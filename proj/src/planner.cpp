#include "cohap/planner.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <sstream>
#include <thread>

#include "cohap/diag.hpp"

namespace cohap::plan {

using ground::BeliefState;
using ground::GroundAction;

ground::GroundOptions PlannerConfig::ground_options() const {
  ground::GroundOptions o;
  o.atom_budget = atom_budget;
  o.safety_strict = safety_strict;
  o.weak_weights = weak_weights;
  return o;
}

namespace {

std::string join(const std::vector<std::string>& xs) {
  std::string s;
  for (const auto& x : xs) s += (s.empty() ? "" : " ; ") + x;
  return s.empty() ? "<initial state>" : s;
}

}  // namespace

Unsolvable::Unsolvable(std::vector<std::string> prefix, int max_horizon)
    : std::runtime_error("no goal-reaching branch within horizon " + std::to_string(max_horizon) +
                         " after: " + join(prefix)),
      prefix_(std::move(prefix)),
      max_horizon_(max_horizon) {}

Planner::Planner(const ground::GroundProblem& p, PlannerConfig cfg) : p_(p), cfg_(std::move(cfg)), h_(p) {}

PlannerStats Planner::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

std::string Planner::step_label(const Step& s) const {
  const auto& a = p_.action(s.action);
  auto l = a.to_string();
  if (s.outcome) l += "/" + a.outcomes[*s.outcome].label;
  return l;
}

namespace {

// Calls f(outcome, successor) for every transition of `a` in `s`; transitions
// that violate a hard state constraint are pruned.
template <class F>
void for_each_successor(const ground::GroundProblem& p, const BeliefState& s, const GroundAction& a, F f) {
  auto apply = [&](std::optional<int> o) {
    BeliefState t;
    try {
      t = p.successor(s, a, o);
    } catch (const ground::DomainError&) {
      return;
    }
    f(o, std::move(t));
  };
  if (a.decision()) {
    for (int o : p.consistent_outcomes(s, a)) apply(o);
  } else {
    apply(std::nullopt);
  }
}

}  // namespace

std::optional<Planner::Suffix> Planner::search(const BeliefState& s, int budget) {
  if (budget < 0) return std::nullopt;
  {
    std::lock_guard lock(mu_);
    ++stats_.searches;
    auto it = cache_.find(s);
    if (it != cache_.end()) {
      const auto& e = it->second;
      if (e.result && static_cast<int>(e.result->steps.size()) <= budget) {
        ++stats_.cache_hits;
        return e.result;
      }
      if (!e.result && budget <= e.budget) {
        ++stats_.cache_hits;
        return std::nullopt;
      }
    }
  }
  PlannerStats local;
  auto r = search_uncached(s, budget, local);
  std::lock_guard lock(mu_);
  stats_.states += local.states;
  stats_.pruned += local.pruned;
  auto& e = cache_[s];
  if (r)
    e.result = r;
  else
    e.budget = std::max(e.budget, budget);
  return r;
}

// Breadth-first layering finds the minimal horizon d; a backward pass over
// the layered graph then picks the cheapest path of length d, keeping the
// first one in action/outcome order among equal costs. Successors whose
// admissible estimate exceeds the current bound D are cut; D starts at the
// estimate of the start state and rises to the smallest cut-off value. With
// D >= d every shortest path survives, so the layered graph still holds all
// of them and the backward pass stays exact.
std::optional<Planner::Suffix> Planner::search_uncached(const BeliefState& s0, int budget, PlannerStats& st) {
  if (p_.goal_reached(s0)) return Suffix{};
  LmCut::Scratch scratch;
  std::unordered_map<BeliefState, int, ground::BeliefHash> hcache;
  auto estimate = [&](const BeliefState& s) {
    auto it = hcache.find(s);
    if (it != hcache.end()) return it->second;
    int v = h_(s, scratch);
    hcache.emplace(s, v);
    return v;
  };
  int h0 = estimate(s0);
  if (h0 == LmCut::kDeadEnd || h0 > budget) return std::nullopt;

  std::vector<std::vector<BeliefState>> layers;
  std::unordered_map<BeliefState, std::pair<int, int>, ground::BeliefHash> seen;  // layer, index
  int d = -1;
  for (int bound = std::max(h0, 1); d < 0;) {
    layers.assign(1, {s0});
    seen.clear();
    seen.emplace(s0, std::make_pair(0, 0));
    int next_bound = INT_MAX;
    for (int k = 0; k < bound && d < 0; ++k) {
      std::vector<BeliefState> next;
      for (const auto& s : layers[k])
        for (int id : p_.applicable(s))
          for_each_successor(p_, s, p_.action(id), [&](std::optional<int>, BeliefState t) {
            if (seen.count(t)) return;
            int h = estimate(t);
            if (h == LmCut::kDeadEnd) return;
            if (k + 1 + h > bound) {
              ++st.pruned;
              next_bound = std::min(next_bound, k + 1 + h);
              return;
            }
            auto it = seen.try_emplace(std::move(t), k + 1, static_cast<int>(next.size())).first;
            if (d < 0 && p_.goal_reached(it->first)) d = k + 1;
            next.push_back(it->first);
          });
      st.states += static_cast<long>(next.size());
      if (next.empty()) break;
      layers.push_back(std::move(next));
    }
    if (d >= 0) break;
    if (next_bound == INT_MAX || next_bound > budget) return std::nullopt;
    bound = next_bound;
  }

  struct Best {
    bool set = false;
    WeightedCost cost;
    Step step;
    int next = -1;
  };
  std::vector<std::vector<Best>> best(d + 1);
  best[d].resize(layers[d].size());
  for (std::size_t i = 0; i < layers[d].size(); ++i)
    if (p_.goal_reached(layers[d][i])) best[d][i].set = true;
  for (int k = d - 1; k >= 0; --k) {
    best[k].resize(layers[k].size());
    for (std::size_t i = 0; i < layers[k].size(); ++i) {
      const auto& s = layers[k][i];
      auto& b = best[k][i];
      for (int id : p_.applicable(s)) {
        const auto& a = p_.action(id);
        std::optional<WeightedCost> step;
        for_each_successor(p_, s, a, [&](std::optional<int> o, BeliefState t) {
          auto it = seen.find(t);
          if (it == seen.end() || it->second.first != k + 1) return;
          const auto& nb = best[k + 1][it->second.second];
          if (!nb.set) return;
          if (!step) step = p_.step_cost(s, a);
          auto c = *step + nb.cost;
          if (!b.set || c < b.cost) {
            b.set = true;
            b.cost = std::move(c);
            b.step = {id, o};
            b.next = it->second.second;
          }
        });
      }
    }
  }
  Suffix out;
  out.cost = best[0][0].cost;
  int idx = 0;
  for (int k = 0; k < d; ++k) {
    const auto& b = best[k][idx];
    out.steps.push_back(b.step);
    idx = b.next;
  }
  return out;
}

Branch Planner::plan_branch(const Branch& fixed) {
  auto r = search(fixed.terminal, cfg_.max_horizon - fixed.horizon);
  if (!r) {
    std::vector<std::string> labels;
    for (const auto& st : fixed.prefix) labels.push_back(step_label(st));
    throw Unsolvable(labels, cfg_.max_horizon);
  }
  Branch b = fixed;
  for (const auto& st : r->steps) {
    b.terminal = p_.successor(b.terminal, p_.action(st.action), st.outcome);
    b.prefix.push_back(st);
  }
  b.cost += r->cost;
  b.horizon = static_cast<int>(b.prefix.size());
  return b;
}

tree::PlanTree Planner::expand_tree() {
  struct Job {
    int parent = -1;  // arena node, -1 for the root
    int slot = 0;
    BeliefState state;
    int depth = 0;
    std::vector<std::string> path;
    std::vector<int> key;  // child slots from the root: preorder position
  };
  struct Failure {
    std::vector<int> key;
    std::vector<std::string> path;
  };

  std::mutex arena_mu;
  std::vector<tree::Node> arena;
  int root = -1;
  std::vector<Failure> failures;

  std::mutex q_mu;
  std::condition_variable q_cv;
  std::deque<Job> queue;
  int active = 0;

  auto spawn = [&](Job j) {
    std::lock_guard lock(q_mu);
    queue.push_back(std::move(j));
    q_cv.notify_one();
  };

  auto add_node = [&](tree::Node n, int parent, int slot) {
    std::lock_guard lock(arena_mu);
    int id = static_cast<int>(arena.size());
    n.id = id;
    arena.push_back(std::move(n));
    if (parent < 0)
      root = id;
    else
      arena[parent].children[slot].child = id;
    return id;
  };

  auto process = [&](Job job) {
    auto r = search(job.state, cfg_.max_horizon - job.depth);
    if (!r) {
      std::lock_guard lock(arena_mu);
      failures.push_back({job.key, job.path});
      return;
    }
    BeliefState s = job.state;
    int parent = job.parent, slot = job.slot, depth = job.depth;
    auto key = job.key;
    auto path = job.path;
    for (const auto& st : r->steps) {
      const auto& a = p_.action(st.action);
      tree::Node n;
      n.kind = tree::node_kind(a.kind);
      n.action = a.name;
      n.args = a.args;
      n.depth = depth;
      int next_slot = 0;
      std::vector<std::pair<int, int>> alternatives;  // (slot, outcome)
      if (a.decision()) {
        auto ok = p_.consistent_outcomes(s, a);
        for (std::size_t j = 0; j < ok.size(); ++j) {
          n.children.push_back({a.outcomes[ok[j]].label, -1});
          if (ok[j] == *st.outcome)
            next_slot = static_cast<int>(j);
          else
            alternatives.emplace_back(static_cast<int>(j), ok[j]);
        }
      } else {
        n.children.push_back({std::nullopt, -1});
      }
      int id = add_node(std::move(n), parent, slot);
      for (auto [j, o] : alternatives) {
        Job child;
        child.parent = id;
        child.slot = j;
        child.depth = depth + 1;
        child.path = path;
        child.path.push_back(step_label({st.action, o}));
        child.key = key;
        child.key.push_back(j);
        try {
          child.state = p_.successor(s, a, o);
        } catch (const ground::DomainError&) {
          std::lock_guard lock(arena_mu);
          failures.push_back({child.key, child.path});
          continue;
        }
        spawn(std::move(child));
      }
      path.push_back(step_label(st));
      key.push_back(next_slot);
      s = p_.successor(s, a, st.outcome);
      parent = id;
      slot = next_slot;
      ++depth;
    }
    tree::Node leaf;
    leaf.kind = tree::NodeKind::Leaf;
    leaf.depth = depth;
    add_node(std::move(leaf), parent, slot);
  };

  queue.push_back({-1, 0, p_.initial(), 0, {}, {}});
  auto worker = [&] {
    std::unique_lock lock(q_mu);
    for (;;) {
      q_cv.wait(lock, [&] { return !queue.empty() || active == 0; });
      if (queue.empty()) return;
      Job j = std::move(queue.front());
      queue.pop_front();
      ++active;
      lock.unlock();
      process(std::move(j));
      lock.lock();
      --active;
      if (queue.empty() && active == 0) q_cv.notify_all();
    }
  };
  int n = std::max(1, cfg_.workers);
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  if (!failures.empty()) {
    auto first = std::min_element(failures.begin(), failures.end(),
                                  [](const Failure& a, const Failure& b) { return a.key < b.key; });
    throw Unsolvable(first->path, cfg_.max_horizon);
  }
  tree::PlanTree t;
  t.nodes = std::move(arena);
  t.root = root;
  t = tree::renumber(t);
  t.safety = tree::safety_info(p_);
  return t;
}

SolveResult solve(const std::string& domain_text, const std::string& instance_text,
                  const std::string& workspace_json, const PlannerConfig& cfg) {
  auto dom = adl::parse_domain(domain_text);
  auto inst = adl::parse_instance(instance_text, dom);
  auto opt = cfg.ground_options();
  std::shared_ptr<feas::FeasibilityOracle> fx;
  if (workspace_json.empty()) {
    fx = std::make_shared<feas::FeasibilityOracle>();
  } else {
    auto ws = std::make_shared<const feas::Workspace>(feas::Workspace::from_json(workspace_json));
    for (const auto& r : ws->regions())
      if (r.unsafe) opt.unsafe_regions.push_back(r.name);
    fx = feas::FeasibilityOracle::for_workspace(ws);
  }

  auto t0 = std::chrono::steady_clock::now();
  auto g = ground::ground(dom, inst, *fx, opt);
  Planner planner(g, cfg);
  SolveResult res;
  res.tree = planner.expand_tree();
  res.timings.plan_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  res.timings.checks_s = fx->check_stats().seconds;
  res.tree.timings = res.timings;
  res.metrics = tree::metrics(res.tree);
  res.ground = g.stats();
  res.planner = planner.stats();
  std::ostringstream f;
  f << "\"searches\":" << res.planner.searches << ",\"cache_hits\":" << res.planner.cache_hits
    << ",\"states\":" << res.planner.states << ",\"nodes\":" << res.metrics.N
    << ",\"plan_s\":" << res.timings.plan_s << ",\"checks_s\":" << res.timings.checks_s;
  diag::record(diag::Level::Info, "plan", f.str());
  return res;
}

}  // namespace cohap::plan

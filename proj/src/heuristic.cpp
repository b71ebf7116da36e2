#include "cohap/heuristic.hpp"

#include <algorithm>
#include <map>

namespace cohap::plan {

LmCut::LmCut(const ground::GroundProblem& p) {
  int atoms = static_cast<int>(p.atom_count());
  true_fact_ = 2 * atoms;
  goal_fact_ = 2 * atoms + 1;
  n_facts_ = 2 * atoms + 2;

  auto lit_facts = [&](const std::vector<ground::GroundLit>& lits) {
    std::vector<int> out;
    for (const auto& l : lits) out.push_back(fact(l.atom, l.positive));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  };
  for (const auto& a : p.actions()) {
    if (a.dead) continue;
    std::map<std::uint32_t, std::uint64_t> known(a.mask.known.begin(), a.mask.known.end());
    std::vector<int> pre;
    for (const auto& [w, m] : a.mask.ones)
      for (int b = 0; b < 64; ++b)
        if ((m >> b) & 1u) pre.push_back(fact(static_cast<ground::AtomId>(w * 64 + b), true));
    // Value-zero bits are "known false" only when the known bit is also required.
    for (const auto& [w, m] : a.mask.zeros)
      for (int b = 0; b < 64; ++b)
        if (((m >> b) & 1u) && known.count(w) && ((known[w] >> b) & 1u))
          pre.push_back(fact(static_cast<ground::AtomId>(w * 64 + b), false));
    if (pre.empty()) pre.push_back(true_fact_);
    std::sort(pre.begin(), pre.end());
    if (a.decision()) {
      for (const auto& o : a.outcomes)
        if (auto add = lit_facts(o.lits); !add.empty()) ops_.push_back({pre, add});
    } else if (auto add = lit_facts(a.effects); !add.empty()) {
      ops_.push_back({pre, add});
    }
  }
  Op goal{lit_facts(p.goal()), {goal_fact_}};
  if (goal.pre.empty()) goal.pre.push_back(true_fact_);
  ops_.push_back(std::move(goal));

  pre_of_.assign(n_facts_, {});
  add_of_.assign(n_facts_, {});
  for (std::size_t o = 0; o < ops_.size(); ++o) {
    for (int f : ops_[o].pre) pre_of_[f].push_back(static_cast<int>(o));
    for (int f : ops_[o].add) add_of_[f].push_back(static_cast<int>(o));
  }
}

// Costs are small nonnegative integers, so a bucket queue replaces the heap.
// Facts above the goal's value are never needed and stay unsettled.
void LmCut::hmax(const ground::BeliefState& s, Scratch& w) const {
  w.hmax.assign(n_facts_, kDeadEnd);
  w.unsat.resize(ops_.size());
  for (std::size_t o = 0; o < ops_.size(); ++o) w.unsat[o] = static_cast<int>(ops_[o].pre.size());
  for (auto& b : w.buckets) b.clear();
  auto reach = [&](int f, int h) {
    if (h < w.hmax[f]) {
      w.hmax[f] = h;
      if (w.buckets.size() <= static_cast<std::size_t>(h)) w.buckets.resize(h + 1);
      w.buckets[h].push_back(f);
    }
  };
  reach(true_fact_, 0);
  const auto& words = s.words();
  std::size_t voff = s.value_offset();
  for (std::size_t i = 0; i < voff; ++i) {
    std::uint64_t k = words[i];
    while (k) {
      int b = __builtin_ctzll(k);
      k &= k - 1;
      auto a = static_cast<ground::AtomId>(i * 64 + b);
      reach(fact(a, (words[voff + i] >> b) & 1u), 0);
    }
  }
  for (std::size_t h = 0; h < w.buckets.size(); ++h)
    for (std::size_t i = 0; i < w.buckets[h].size(); ++i) {
      int f = w.buckets[h][i];
      if (w.hmax[f] != static_cast<int>(h)) continue;
      if (f == goal_fact_) return;
      for (int o : pre_of_[f])
        if (--w.unsat[o] == 0)
          for (int g : ops_[o].add) reach(g, static_cast<int>(h) + w.cost[o]);
    }
}

int LmCut::operator()(const ground::BeliefState& s, Scratch& w) const {
  const int n_ops = static_cast<int>(ops_.size());
  w.cost.assign(n_ops, 1);
  w.cost[n_ops - 1] = 0;
  w.pcf.resize(n_ops);
  w.in_cut.assign(n_ops, 0);
  int h = 0;
  for (;;) {
    hmax(s, w);
    if (w.hmax[goal_fact_] == kDeadEnd) return kDeadEnd;
    if (w.hmax[goal_fact_] == 0) return h;

    for (int o = 0; o < n_ops; ++o) {
      int best = -1;
      for (int f : ops_[o].pre) {
        if (w.hmax[f] == kDeadEnd) {
          best = -1;
          break;
        }
        if (best < 0 || w.hmax[f] > w.hmax[best]) best = f;
      }
      w.pcf[o] = best;
    }

    // Goal zone: facts with a zero-cost justification path to the goal.
    w.in_goal_zone.assign(n_facts_, 0);
    w.in_goal_zone[goal_fact_] = 1;
    w.stack.assign(1, goal_fact_);
    while (!w.stack.empty()) {
      int g = w.stack.back();
      w.stack.pop_back();
      for (int o : add_of_[g]) {
        int f = w.pcf[o];
        if (w.cost[o] != 0 || f < 0 || w.in_goal_zone[f]) continue;
        w.in_goal_zone[f] = 1;
        w.stack.push_back(f);
      }
    }

    // Facts reachable from the state without entering the goal zone; the
    // operators crossing into it form the cut.
    w.reached.assign(n_facts_, 0);
    for (int f = 0; f < n_facts_; ++f)
      if (w.hmax[f] == 0 && !w.in_goal_zone[f]) {
        w.reached[f] = 1;
        w.stack.push_back(f);
      }
    w.cut.clear();
    while (!w.stack.empty()) {
      int f = w.stack.back();
      w.stack.pop_back();
      for (int o : pre_of_[f]) {
        if (w.pcf[o] != f) continue;
        for (int g : ops_[o].add) {
          if (w.in_goal_zone[g]) {
            if (!w.in_cut[o]) {
              w.in_cut[o] = 1;
              w.cut.push_back(o);
            }
          } else if (!w.reached[g]) {
            w.reached[g] = 1;
            w.stack.push_back(g);
          }
        }
      }
    }
    int m = kDeadEnd;
    for (int o : w.cut) m = std::min(m, w.cost[o]);
    if (w.cut.empty() || m <= 0) return h;  // cannot happen for a consistent relaxation
    h += m;
    for (int o : w.cut) {
      w.cost[o] -= m;
      w.in_cut[o] = 0;
    }
  }
}

}  // namespace cohap::plan

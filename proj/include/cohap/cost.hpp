#pragma once

#include <compare>
#include <map>
#include <string>

namespace cohap {

/// Weak-constraint cost: level -> accumulated weight. Compared
/// lexicographically from the highest level down; absent levels are 0.
struct WeightedCost {
  std::map<int, long> levels;

  void add(int level, long weight) {
    if (weight != 0) levels[level] += weight;
  }
  WeightedCost& operator+=(const WeightedCost& o) {
    for (const auto& [l, w] : o.levels) add(l, w);
    return *this;
  }
  friend WeightedCost operator+(WeightedCost a, const WeightedCost& b) { return a += b; }

  long at(int level) const {
    auto it = levels.find(level);
    return it == levels.end() ? 0 : it->second;
  }

  friend std::strong_ordering operator<=>(const WeightedCost& a, const WeightedCost& b) {
    auto ia = a.levels.rbegin(), ib = b.levels.rbegin();
    while (ia != a.levels.rend() || ib != b.levels.rend()) {
      int la = ia != a.levels.rend() ? ia->first : -1;
      int lb = ib != b.levels.rend() ? ib->first : -1;
      int top = std::max(la, lb);
      long va = la == top ? ia->second : 0;
      long vb = lb == top ? ib->second : 0;
      if (va != vb) return va <=> vb;
      if (la == top) ++ia;
      if (lb == top) ++ib;
    }
    return std::strong_ordering::equal;
  }
  friend bool operator==(const WeightedCost& a, const WeightedCost& b) {
    return (a <=> b) == std::strong_ordering::equal;
  }

  /// "4@2 1@1", highest level first; "0" when empty.
  std::string to_string() const {
    std::string s;
    for (auto it = levels.rbegin(); it != levels.rend(); ++it) {
      if (it->second == 0) continue;
      if (!s.empty()) s += " ";
      s += std::to_string(it->second) + "@" + std::to_string(it->first);
    }
    return s.empty() ? "0" : s;
  }
};

}  // namespace cohap

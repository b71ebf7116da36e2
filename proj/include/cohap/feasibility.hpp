// External predicates and the grid workspace checker behind them.
#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace cohap::feas {

class FeasibilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell&) const = default;
};

struct Manipulator {
  std::string name;
  Cell base;
  double reach = 0.0;  // meters
};

/// Axis-aligned, inclusive cell rectangle.
struct Region {
  std::string name;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool unsafe = false;

  bool contains(Cell c) const { return c.x >= x0 && c.x <= x1 && c.y >= y0 && c.y <= y1; }
};

class Workspace {
 public:
  Workspace(double cell_size, int width, int height);

  /// Parses and validates the workspace JSON format.
  static Workspace from_json(const std::string& text);
  std::string to_json() const;

  double cell_size() const { return cell_size_; }
  int width() const { return width_; }
  int height() const { return height_; }
  bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }
  bool is_obstacle(Cell c) const { return obstacle_[index(c)]; }
  void set_obstacle(Cell c, bool v);

  void add_manipulator(Manipulator m);
  void add_region(Region r);
  const std::vector<Manipulator>& manipulators() const { return manips_; }
  const std::vector<Region>& regions() const { return regions_; }
  const Manipulator& manipulator(const std::string& name) const;
  const Region& region(const std::string& name) const;

  /// Throws FeasibilityError when an invariant is violated.
  void check_invariants() const;

 private:
  size_t index(Cell c) const { return static_cast<size_t>(c.y) * width_ + c.x; }

  double cell_size_;
  int width_;
  int height_;
  std::vector<bool> obstacle_;
  std::vector<Manipulator> manips_;
  std::vector<Region> regions_;
};

/// Breadth-first search over 4-connected free cells whose centers lie within
/// the manipulator's reach of its base; true iff some cell of `region` is hit.
bool reachable(const std::string& manip, const std::string& region, const Workspace& w);

/// Same search, targeting one cell.
bool collision_free(const std::string& manip, Cell target, const Workspace& w);

struct CheckStats {
  long calls = 0;
  long hits = 0;
  double seconds = 0.0;
};

/// Registry of external predicates with a transparent result cache.
/// Safe to call from several planner workers.
class FeasibilityOracle {
 public:
  using Fn = std::function<bool(const std::vector<std::string>&)>;

  void register_external(const std::string& name, int arity, Fn fn);
  bool has(const std::string& name) const;
  int arity(const std::string& name) const;

  bool eval(const std::string& name, const std::vector<std::string>& args);
  CheckStats check_stats() const;
  void set_cache_enabled(bool on);

  /// Registers reachable/2 (manip, region) and collision_free/3 (manip, x, y).
  static std::shared_ptr<FeasibilityOracle> for_workspace(std::shared_ptr<const Workspace> w);

 private:
  struct Entry {
    int arity;
    Fn fn;
  };
  mutable std::mutex mu_;
  std::map<std::string, Entry> registry_;
  std::map<std::pair<std::string, std::vector<std::string>>, bool> cache_;
  CheckStats stats_;
  bool cache_enabled_ = true;
};

}  // namespace cohap::feas

#include "cohap/feasibility.hpp"

#include <chrono>
#include <cmath>
#include <deque>

#include "json.hpp"

namespace cohap::feas {

using nlohmann::json;

Workspace::Workspace(double cell_size, int width, int height)
    : cell_size_(cell_size), width_(width), height_(height) {
  if (width <= 0 || height <= 0) throw FeasibilityError("workspace dimensions must be positive");
  if (!(cell_size > 0)) throw FeasibilityError("cellSize must be positive");
  obstacle_.assign(static_cast<size_t>(width) * height, false);
}

void Workspace::set_obstacle(Cell c, bool v) {
  if (!in_bounds(c)) throw FeasibilityError("obstacle cell out of bounds");
  obstacle_[index(c)] = v;
}

void Workspace::add_manipulator(Manipulator m) { manips_.push_back(std::move(m)); }
void Workspace::add_region(Region r) { regions_.push_back(std::move(r)); }

const Manipulator& Workspace::manipulator(const std::string& name) const {
  for (const auto& m : manips_)
    if (m.name == name) return m;
  throw FeasibilityError("unknown manipulator '" + name + "'");
}

const Region& Workspace::region(const std::string& name) const {
  for (const auto& r : regions_)
    if (r.name == name) return r;
  throw FeasibilityError("unknown region '" + name + "'");
}

void Workspace::check_invariants() const {
  for (const auto& m : manips_) {
    if (!in_bounds(m.base) || is_obstacle(m.base))
      throw FeasibilityError("manipulator '" + m.name + "' base is not a free cell");
    if (!(m.reach > 0)) throw FeasibilityError("manipulator '" + m.name + "' reach must be > 0");
  }
  for (const auto& r : regions_) {
    if (r.x0 > r.x1 || r.y0 > r.y1 || !in_bounds({r.x0, r.y0}) || !in_bounds({r.x1, r.y1}))
      throw FeasibilityError("region '" + r.name + "' is not within the grid");
  }
}

Workspace Workspace::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
    Workspace w(j.at("cellSize").get<double>(), j.at("width").get<int>(), j.at("height").get<int>());
    for (const auto& o : j.value("obstacles", json::array()))
      w.set_obstacle({o.at(0).get<int>(), o.at(1).get<int>()}, true);
    for (const auto& m : j.value("manipulators", json::array()))
      w.add_manipulator({m.at("name").get<std::string>(),
                         {m.at("base").at(0).get<int>(), m.at("base").at(1).get<int>()},
                         m.at("reach").get<double>()});
    for (const auto& r : j.value("regions", json::array())) {
      const auto& rect = r.at("rect");
      w.add_region({r.at("name").get<std::string>(), rect.at(0).get<int>(), rect.at(1).get<int>(),
                    rect.at(2).get<int>(), rect.at(3).get<int>(), r.value("unsafe", false)});
    }
    w.check_invariants();
    return w;
  } catch (const json::exception& e) {
    throw FeasibilityError(std::string("malformed workspace JSON: ") + e.what());
  }
}

std::string Workspace::to_json() const {
  json j;
  j["cellSize"] = cell_size_;
  j["width"] = width_;
  j["height"] = height_;
  j["obstacles"] = json::array();
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x)
      if (is_obstacle({x, y})) j["obstacles"].push_back({x, y});
  j["manipulators"] = json::array();
  for (const auto& m : manips_)
    j["manipulators"].push_back({{"name", m.name}, {"base", {m.base.x, m.base.y}}, {"reach", m.reach}});
  j["regions"] = json::array();
  for (const auto& r : regions_)
    j["regions"].push_back(
        {{"name", r.name}, {"rect", {r.x0, r.y0, r.x1, r.y1}}, {"unsafe", r.unsafe}});
  return j.dump(2) + "\n";
}

namespace {

// Generic arm-sweep BFS; `hit` decides success.
template <class Pred>
bool sweep_search(const Manipulator& m, const Workspace& w, Pred hit) {
  auto within = [&](Cell c) {
    double dx = c.x - m.base.x, dy = c.y - m.base.y;
    return std::sqrt(dx * dx + dy * dy) * w.cell_size() <= m.reach + 1e-12;
  };
  std::vector<bool> seen(static_cast<size_t>(w.width()) * w.height(), false);
  auto idx = [&](Cell c) { return static_cast<size_t>(c.y) * w.width() + c.x; };
  std::deque<Cell> q{m.base};
  seen[idx(m.base)] = true;
  while (!q.empty()) {
    Cell c = q.front();
    q.pop_front();
    if (hit(c)) return true;
    static constexpr int dx[] = {1, -1, 0, 0};
    static constexpr int dy[] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      Cell n{c.x + dx[k], c.y + dy[k]};
      if (!w.in_bounds(n) || seen[idx(n)] || w.is_obstacle(n) || !within(n)) continue;
      seen[idx(n)] = true;
      q.push_back(n);
    }
  }
  return false;
}

}  // namespace

bool reachable(const std::string& manip, const std::string& region, const Workspace& w) {
  const auto& m = w.manipulator(manip);
  const auto& r = w.region(region);
  return sweep_search(m, w, [&](Cell c) { return r.contains(c); });
}

bool collision_free(const std::string& manip, Cell target, const Workspace& w) {
  const auto& m = w.manipulator(manip);
  if (!w.in_bounds(target)) throw FeasibilityError("target cell out of bounds");
  if (w.is_obstacle(target)) return false;
  return sweep_search(m, w, [&](Cell c) { return c == target; });
}

void FeasibilityOracle::register_external(const std::string& name, int arity, Fn fn) {
  std::lock_guard lock(mu_);
  registry_[name] = {arity, std::move(fn)};
}

bool FeasibilityOracle::has(const std::string& name) const {
  std::lock_guard lock(mu_);
  return registry_.count(name) > 0;
}

int FeasibilityOracle::arity(const std::string& name) const {
  std::lock_guard lock(mu_);
  auto it = registry_.find(name);
  if (it == registry_.end()) throw FeasibilityError("unregistered external '" + name + "'");
  return it->second.arity;
}

bool FeasibilityOracle::eval(const std::string& name, const std::vector<std::string>& args) {
  Fn fn;
  {
    std::lock_guard lock(mu_);
    auto it = registry_.find(name);
    if (it == registry_.end()) throw FeasibilityError("unregistered external '" + name + "'");
    if (static_cast<int>(args.size()) != it->second.arity)
      throw FeasibilityError("arity mismatch calling external '" + name + "'");
    ++stats_.calls;
    if (cache_enabled_) {
      auto c = cache_.find({name, args});
      if (c != cache_.end()) {
        ++stats_.hits;
        return c->second;
      }
    }
    fn = it->second.fn;
  }
  auto t0 = std::chrono::steady_clock::now();
  bool v = fn(args);
  double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::lock_guard lock(mu_);
  stats_.seconds += dt;
  if (cache_enabled_) cache_.emplace(std::make_pair(name, args), v);
  return v;
}

CheckStats FeasibilityOracle::check_stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

void FeasibilityOracle::set_cache_enabled(bool on) {
  std::lock_guard lock(mu_);
  cache_enabled_ = on;
}

std::shared_ptr<FeasibilityOracle> FeasibilityOracle::for_workspace(
    std::shared_ptr<const Workspace> w) {
  auto fx = std::make_shared<FeasibilityOracle>();
  fx->register_external("reachable", 2, [w](const std::vector<std::string>& a) {
    return reachable(a[0], a[1], *w);
  });
  fx->register_external("collision_free", 3, [w](const std::vector<std::string>& a) {
    return collision_free(a[0], {std::stoi(a[1]), std::stoi(a[2])}, *w);
  });
  return fx;
}

}  // namespace cohap::feas

#include "cohap/plantree.hpp"

#include <cstdio>
#include <functional>
#include <set>
#include <sstream>

#include "json.hpp"

namespace cohap::tree {

using nlohmann::json;

const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Actuation: return "actuation";
    case NodeKind::Sensing: return "sensing";
    case NodeKind::CommDet: return "commDet";
    case NodeKind::CommNondet: return "commNondet";
    case NodeKind::Leaf: return "leaf";
  }
  return "?";
}

std::optional<NodeKind> parse_node_kind(const std::string& s) {
  for (auto k : {NodeKind::Actuation, NodeKind::Sensing, NodeKind::CommDet, NodeKind::CommNondet,
                 NodeKind::Leaf})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

NodeKind node_kind(adl::ActionKind k) {
  switch (k) {
    case adl::ActionKind::Actuation: return NodeKind::Actuation;
    case adl::ActionKind::Sensing: return NodeKind::Sensing;
    case adl::ActionKind::CommDet: return NodeKind::CommDet;
    case adl::ActionKind::CommNondet: return NodeKind::CommNondet;
  }
  return NodeKind::Actuation;
}

std::string Node::label() const {
  if (kind == NodeKind::Leaf) return "goal";
  if (args.empty()) return action;
  std::string s = action + "(";
  for (std::size_t i = 0; i < args.size(); ++i) s += (i ? "," : "") + args[i];
  return s + ")";
}

Metrics metrics(const PlanTree& t) {
  Metrics m;
  if (t.root < 0) return m;
  struct Longest {
    int D = -1, A = 0, S = 0, C = 0;
  };
  // Longest branch below each node; the first child wins ties.
  std::function<Longest(int)> walk = [&](int id) -> Longest {
    const auto& n = t.node(id);
    ++m.N;
    if (n.kind == NodeKind::Leaf) {
      ++m.L;
      return {0, 0, 0, 0};
    }
    if (is_decision(n.kind)) {
      ++m.DN;
      m.BF = std::max(m.BF, static_cast<int>(n.children.size()));
    }
    if (n.action == "askHelp") ++m.K;
    if (n.action == "offerHelp") ++m.O;
    if (n.action == "confirmAttach") ++m.Cc;
    if (n.action.rfind("request", 0) == 0) ++m.Rq;
    Longest best;
    for (const auto& e : n.children) {
      auto b = walk(e.child);
      if (b.D > best.D) best = b;
    }
    if (best.D < 0) best = {0, 0, 0, 0};
    ++best.D;
    if (n.kind == NodeKind::Actuation)
      ++best.A;
    else if (n.kind == NodeKind::Sensing)
      ++best.S;
    else
      ++best.C;
    return best;
  };
  auto b = walk(t.root);
  m.D = b.D;
  m.A = b.A;
  m.S = b.S;
  m.C = b.C;
  return m;
}

std::vector<Violation> check_structure(const PlanTree& t) {
  std::vector<Violation> out;
  if (t.root < 0 || t.root >= static_cast<int>(t.nodes.size())) {
    out.push_back({"structure", -1, "tree has no root"});
    return out;
  }
  for (std::size_t i = 0; i < t.nodes.size(); ++i)
    if (t.nodes[i].id != static_cast<int>(i))
      out.push_back({"structure", t.nodes[i].id, "node ids must equal their index"});
  std::vector<int> parents(t.nodes.size(), 0);
  for (const auto& n : t.nodes) {
    std::set<std::string> labels;
    for (const auto& e : n.children) {
      if (e.child < 0 || e.child >= static_cast<int>(t.nodes.size())) {
        out.push_back({"structure", n.id, "edge to missing node " + std::to_string(e.child)});
        continue;
      }
      ++parents[e.child];
      if (is_decision(n.kind)) {
        if (!e.outcome)
          out.push_back({"structure", n.id, "decision edge without outcome label"});
        else if (!labels.insert(*e.outcome).second)
          out.push_back({"structure", n.id, "duplicate outcome label '" + *e.outcome + "'"});
      } else if (e.outcome) {
        out.push_back({"structure", n.id, "labelled edge below a non-decision node"});
      }
    }
    auto k = n.children.size();
    if (n.kind == NodeKind::Leaf && k != 0)
      out.push_back({"children", n.id, "leaf with children"});
    else if ((n.kind == NodeKind::Actuation || n.kind == NodeKind::CommDet) && k != 1)
      out.push_back({"children", n.id, n.label() + " must have exactly one child"});
    else if (is_decision(n.kind) && k < 2)
      out.push_back({"children", n.id, n.label() + " must have at least two children"});
  }
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    int want = static_cast<int>(i) == t.root ? 0 : 1;
    if (parents[i] != want)
      out.push_back({"structure", static_cast<int>(i),
                     "node has " + std::to_string(parents[i]) + " parents"});
  }
  return out;
}

std::vector<Violation> replay_validate(const PlanTree& t, const ground::GroundProblem& p) {
  auto out = check_structure(t);
  if (!out.empty()) return out;
  struct Item {
    int id;
    ground::BeliefState s;
  };
  std::vector<Item> stack{{t.root, p.initial()}};
  while (!stack.empty()) {
    auto [id, s] = std::move(stack.back());
    stack.pop_back();
    const auto& n = t.node(id);
    if (n.kind == NodeKind::Leaf) {
      if (!p.goal_reached(s)) out.push_back({"goal", id, "leaf state does not satisfy the goal"});
      continue;
    }
    auto aid = p.find_action(n.action, n.args);
    if (!aid) {
      out.push_back({"unknown-action", id, "no ground action " + n.label()});
      continue;
    }
    const auto& a = p.action(*aid);
    if (node_kind(a.kind) != n.kind) {
      out.push_back({"kind", id, n.label() + " is " + to_string(node_kind(a.kind))});
      continue;
    }
    if (!p.pre_holds(a, s)) {
      out.push_back({"precondition", id, "precondition of " + n.label() + " fails"});
      continue;
    }
    try {
      if (!is_decision(n.kind)) {
        stack.push_back({n.children[0].child, p.successor(s, a, std::nullopt)});
        continue;
      }
      auto ok = p.consistent_outcomes(s, a);
      bool match = ok.size() == n.children.size();
      for (std::size_t i = 0; match && i < ok.size(); ++i)
        match = a.outcomes[ok[i]].label == *n.children[i].outcome;
      if (!match) {
        std::string want;
        for (int o : ok) want += (want.empty() ? "" : ",") + a.outcomes[o].label;
        out.push_back({"outcome-mismatch", id, n.label() + " expects outcomes [" + want + "]"});
        continue;
      }
      // Reverse so paths are visited left to right.
      for (std::size_t i = ok.size(); i-- > 0;)
        stack.push_back({n.children[i].child, p.successor(s, a, ok[i])});
    } catch (const ground::DomainError& e) {
      out.push_back({"constraint", id, e.what()});
    }
  }
  return out;
}

namespace {

json metrics_json(const Metrics& m) {
  return {{"L", m.L},   {"D", m.D},   {"A", m.A},   {"S", m.S},   {"C", m.C},   {"K", m.K},
          {"O", m.O},   {"Cc", m.Cc}, {"Rq", m.Rq}, {"DN", m.DN}, {"BF", m.BF}, {"N", m.N}};
}

}  // namespace

std::string to_json(const PlanTree& t) {
  json j;
  j["version"] = 1;
  j["root"] = t.root;
  j["nodes"] = json::array();
  for (const auto& n : t.nodes) {
    json jn{{"id", n.id}, {"kind", to_string(n.kind)}, {"action", n.action}, {"args", n.args},
            {"depth", n.depth}};
    jn["children"] = json::array();
    for (const auto& e : n.children) {
      json je{{"id", e.child}};
      je["outcome"] = e.outcome ? json(*e.outcome) : json(nullptr);
      jn["children"].push_back(je);
    }
    j["nodes"].push_back(jn);
  }
  j["metrics"] = metrics_json(metrics(t));
  j["safety"] = {{"dangerous", t.safety.dangerous},
                 {"unsafeRegions", t.safety.unsafe_regions},
                 {"location", t.safety.location}};
  if (t.timings) j["timings"] = {{"plan_s", t.timings->plan_s}, {"checks_s", t.timings->checks_s}};
  return j.dump(1) + "\n";
}

PlanTree from_json(const std::string& text) {
  PlanTree t;
  try {
    auto j = json::parse(text);
    if (j.value("version", 0) != 1) throw TreeError("unsupported plan-tree version");
    if (!j.contains("root") || j["root"].is_null()) throw TreeError("plan tree has no root");
    t.root = j["root"].get<int>();
    for (const auto& jn : j.at("nodes")) {
      Node n;
      n.id = jn.at("id").get<int>();
      auto k = parse_node_kind(jn.at("kind").get<std::string>());
      if (!k) throw TreeError("unknown node kind '" + jn["kind"].get<std::string>() + "'");
      n.kind = *k;
      n.action = jn.value("action", "");
      n.args = jn.value("args", std::vector<std::string>{});
      n.depth = jn.value("depth", 0);
      for (const auto& je : jn.value("children", json::array())) {
        Edge e;
        e.child = je.at("id").get<int>();
        if (je.contains("outcome") && !je["outcome"].is_null()) e.outcome = je["outcome"].get<std::string>();
        n.children.push_back(std::move(e));
      }
      t.nodes.push_back(std::move(n));
    }
    if (t.nodes.empty()) throw TreeError("plan tree has no nodes");
    if (j.contains("safety")) {
      const auto& s = j["safety"];
      t.safety.dangerous = s.value("dangerous", std::vector<std::string>{});
      t.safety.unsafe_regions = s.value("unsafeRegions", std::vector<std::string>{});
      t.safety.location = s.value("location", std::map<std::string, std::string>{});
    }
    if (j.contains("timings"))
      t.timings = Timings{j["timings"].value("plan_s", 0.0), j["timings"].value("checks_s", 0.0)};
  } catch (const json::exception& e) {
    throw TreeError(std::string("malformed plan-tree JSON: ") + e.what());
  }
  auto v = check_structure(t);
  if (!v.empty()) throw TreeError("invalid plan tree: " + v.front().message);
  return t;
}

std::string to_dot(const PlanTree& t) {
  std::ostringstream o;
  o << "digraph plan {\n  node [shape=box, style=filled, fontname=\"Helvetica\"];\n";
  for (const auto& n : t.nodes) {
    o << "  n" << n.id << " [label=\"" << n.label() << "\"";
    switch (n.kind) {
      case NodeKind::Actuation: o << ", fillcolor=gray"; break;
      case NodeKind::Sensing: o << ", fillcolor=yellow"; break;
      case NodeKind::CommDet: o << ", fillcolor=lightblue"; break;
      case NodeKind::CommNondet: o << ", fillcolor=yellow, color=blue, penwidth=2"; break;
      case NodeKind::Leaf: o << ", shape=doublecircle, fillcolor=palegreen"; break;
    }
    o << "];\n";
  }
  for (const auto& n : t.nodes)
    for (const auto& e : n.children) {
      o << "  n" << n.id << " -> n" << e.child;
      if (e.outcome) o << " [label=\"" << *e.outcome << "\"]";
      o << ";\n";
    }
  o << "}\n";
  return o.str();
}

PlanTree renumber(const PlanTree& t) {
  PlanTree out;
  out.safety = t.safety;
  out.timings = t.timings;
  if (t.root < 0) return out;
  std::function<int(int, int)> copy = [&](int id, int depth) -> int {
    int nid = static_cast<int>(out.nodes.size());
    Node n = t.node(id);
    n.id = nid;
    n.depth = depth;
    auto kids = n.children;
    n.children.clear();
    out.nodes.push_back(std::move(n));
    for (auto e : kids) {
      e.child = copy(e.child, depth + 1);
      out.nodes[nid].children.push_back(e);
    }
    return nid;
  };
  out.root = copy(t.root, 0);
  return out;
}

SafetyInfo safety_info(const ground::GroundProblem& p) {
  SafetyInfo s;
  const auto& st = p.statics();
  if (auto it = st.find("dangerous"); it != st.end())
    for (const auto& tup : it->second) s.dangerous.push_back(tup.at(0));
  if (auto it = st.find("loc"); it != st.end())
    for (const auto& tup : it->second)
      if (tup.size() == 2) s.location[tup[0]] = tup[1];
  if (auto it = st.find("unsafeRegion"); it != st.end())
    for (const auto& tup : it->second) s.unsafe_regions.push_back(tup.at(0));
  return s;
}

const char* const kCsvHeader = "inst,U,P,R,L,D,A,S,C,K,O,Cc,Rq,DN,BF,N,plan_s,checks_s";

std::string csv_row(const std::string& inst, int U, int P, int R, const Metrics& m, const Timings& tm) {
  char times[64];
  std::snprintf(times, sizeof times, "%.4f,%.4f", tm.plan_s, tm.checks_s);
  std::ostringstream o;
  o << inst << ',' << U << ',' << P << ',' << R << ',' << m.L << ',' << m.D << ',' << m.A << ','
    << m.S << ',' << m.C << ',' << m.K << ',' << m.O << ',' << m.Cc << ',' << m.Rq << ',' << m.DN
    << ',' << m.BF << ',' << m.N << ',' << times;
  return o.str();
}

}  // namespace cohap::tree

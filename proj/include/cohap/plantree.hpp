// Conditional plan trees: structure, metrics, replay validation, serialization.
#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cohap/grounder.hpp"

namespace cohap::tree {

class TreeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class NodeKind { Actuation, Sensing, CommDet, CommNondet, Leaf };

const char* to_string(NodeKind k);
NodeKind node_kind(adl::ActionKind k);
std::optional<NodeKind> parse_node_kind(const std::string& s);
inline bool is_decision(NodeKind k) { return k == NodeKind::Sensing || k == NodeKind::CommNondet; }

struct Edge {
  std::optional<std::string> outcome;  // set on decision edges only
  int child = -1;
  bool operator==(const Edge&) const = default;
};

struct Node {
  int id = -1;
  NodeKind kind = NodeKind::Leaf;
  std::string action;  // empty for goal leaves
  std::vector<std::string> args;
  int depth = 0;
  std::vector<Edge> children;
  bool operator==(const Node&) const = default;

  std::string label() const;  // "askHelp(leg2,top1,c2)"
};

struct Metrics {
  int L = 0, D = 0, A = 0, S = 0, C = 0;
  int K = 0, O = 0, Cc = 0, Rq = 0;
  int DN = 0, BF = 0, N = 0;
  bool operator==(const Metrics&) const = default;
};

struct Timings {
  double plan_s = 0.0;
  double checks_s = 0.0;
};

/// Static facts the teammate console needs for its safety badges.
struct SafetyInfo {
  std::vector<std::string> dangerous;
  std::vector<std::string> unsafe_regions;
  std::map<std::string, std::string> location;  // part -> region
  bool operator==(const SafetyInfo&) const = default;
};

/// Nodes are stored densely; ids equal indices and follow preorder.
struct PlanTree {
  std::vector<Node> nodes;
  int root = -1;
  SafetyInfo safety;
  std::optional<Timings> timings;

  const Node& node(int id) const { return nodes.at(id); }
  bool operator==(const PlanTree& o) const {
    return nodes == o.nodes && root == o.root && safety == o.safety;
  }
};

Metrics metrics(const PlanTree& t);

struct Violation {
  std::string code;  // structure | unknown-action | kind | precondition | children | outcome-mismatch | constraint | goal
  int node = -1;
  std::string message;
};

/// Replays every root-to-leaf path; an empty result means the tree is valid.
std::vector<Violation> replay_validate(const PlanTree& t, const ground::GroundProblem& p);

/// Structure only: single root, dense preorder ids, child counts per kind.
std::vector<Violation> check_structure(const PlanTree& t);

/// Deterministic JSON (sorted keys). Timings are written when present.
std::string to_json(const PlanTree& t);
PlanTree from_json(const std::string& text);
std::string to_dot(const PlanTree& t);

/// Renumbers nodes in preorder from `root` and drops unreachable nodes.
PlanTree renumber(const PlanTree& t);

SafetyInfo safety_info(const ground::GroundProblem& p);

extern const char* const kCsvHeader;
std::string csv_row(const std::string& inst, int U, int P, int R, const Metrics& m, const Timings& tm);

}  // namespace cohap::tree

#include <map>
#include <set>

#include "cohap/adl.hpp"
#include "json.hpp"

namespace cohap::adl {

using nlohmann::json;

namespace {

SourcePos byte_to_pos(const std::string& text, size_t byte) {
  SourcePos p{1, 1};
  for (size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++p.line;
      p.col = 1;
    } else {
      ++p.col;
    }
  }
  return p;
}

[[noreturn]] void fail(const std::string& msg) { throw ParseError({0, 0}, msg); }

GroundLiteral literal_from_json(const json& j) {
  if (!j.is_string()) fail("literal must be a string");
  try {
    return parse_ground_literal(j.get<std::string>());
  } catch (const ParseError& e) {
    fail("bad literal '" + j.get<std::string>() + "': " + e.message());
  }
}

}  // namespace

InstanceSpec parse_instance(const std::string& text, const DomainSpec& dom) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(byte_to_pos(text, e.byte), "malformed instance JSON");
  }
  if (!j.is_object()) fail("instance must be a JSON object");

  InstanceSpec inst;
  inst.name = j.value("name", "");
  inst.workspace = j.value("workspace", "");
  if (j.contains("params"))
    for (auto& [k, v] : j["params"].items()) inst.params[k] = v.get<int>();

  std::map<std::string, std::string> sort_of;  // constant -> sort
  for (const auto& s : dom.sorts)
    for (const auto& m : s.members) sort_of[m] = s.name;
  if (j.contains("objects")) {
    for (auto& [sort, members] : j["objects"].items()) {
      if (!dom.find_sort(sort)) fail("objects: unknown sort '" + sort + "'");
      auto& dst = inst.objects[sort];
      for (const auto& m : members) {
        auto name = m.get<std::string>();
        if (sort_of.count(name))
          fail("constant '" + name + "' assigned to more than one sort");
        sort_of[name] = sort;
        dst.push_back(name);
      }
    }
  }
  auto require_const = [&](const std::string& c, const std::string& ctx) {
    if (!sort_of.count(c)) fail(ctx + ": unsorted constant '" + c + "'");
  };

  if (j.contains("statics")) {
    for (auto& [name, tuples] : j["statics"].items()) {
      const auto* decl = dom.find_static(name);
      if (!decl) fail("statics: unknown static relation '" + name + "'");
      auto& dst = inst.statics[name];
      for (const auto& t : tuples) {
        std::vector<std::string> tup;
        if (t.is_array()) {
          for (const auto& x : t) tup.push_back(x.get<std::string>());
        } else {
          tup.push_back(t.get<std::string>());
        }
        if (static_cast<int>(tup.size()) != decl->arity)
          fail("statics: arity mismatch for '" + name + "'");
        for (size_t i = 0; i < tup.size(); ++i) {
          require_const(tup[i], "statics " + name);
          if (!decl->arg_sorts.empty() && sort_of[tup[i]] != decl->arg_sorts[i])
            fail("statics " + name + ": ill-sorted argument '" + tup[i] + "'");
        }
        dst.push_back(std::move(tup));
      }
    }
  }

  auto check_lit = [&](const GroundLiteral& l, const std::string& ctx) {
    const auto* f = dom.find_fluent(l.fluent);
    if (!f) fail(ctx + ": undeclared fluent '" + l.fluent + "'");
    if (f->arg_sorts.size() != l.args.size()) fail(ctx + ": arity mismatch in " + to_string(l));
    for (size_t i = 0; i < l.args.size(); ++i) {
      require_const(l.args[i], ctx);
      if (sort_of[l.args[i]] != f->arg_sorts[i])
        fail(ctx + ": ill-sorted argument '" + l.args[i] + "' in " + to_string(l));
    }
  };

  std::map<std::pair<std::string, std::vector<std::string>>, bool> seen;
  for (const auto& x : j.value("init", json::array())) {
    auto l = literal_from_json(x);
    check_lit(l, "init");
    auto key = std::make_pair(l.fluent, l.args);
    auto it = seen.find(key);
    if (it != seen.end() && it->second != !l.negative)
      fail("init: contradiction on " + to_string(GroundLiteral{l.fluent, l.args, false}));
    seen[key] = !l.negative;
    inst.init.push_back(std::move(l));
  }
  for (const auto& x : j.value("goal", json::array())) {
    auto l = literal_from_json(x);
    check_lit(l, "goal");
    inst.goal.push_back(std::move(l));
  }
  return inst;
}

std::string instance_to_json(const InstanceSpec& inst) {
  json j;
  j["name"] = inst.name;
  j["objects"] = json::object();
  for (const auto& [s, m] : inst.objects) j["objects"][s] = m;
  j["statics"] = json::object();
  for (const auto& [s, tuples] : inst.statics) j["statics"][s] = tuples;
  j["init"] = json::array();
  for (const auto& l : inst.init) j["init"].push_back(to_string(l));
  j["goal"] = json::array();
  for (const auto& l : inst.goal) j["goal"].push_back(to_string(l));
  if (!inst.workspace.empty()) j["workspace"] = inst.workspace;
  if (!inst.params.empty()) j["params"] = inst.params;
  return j.dump(2) + "\n";
}

}  // namespace cohap::adl

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <future>
#include <set>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "fixture.hpp"
#include "oracle.hpp"
#include "cohap/executor.hpp"
#include "cohap/planner.hpp"
#include "json.hpp"

using namespace cohap;
using exec::ExecError;
using json = nlohmann::json;

namespace {

struct Planned {
  testutil::Baseline f;
  ground::GroundProblem g = f.ground({.unsafe_regions = {"hazard"}});
  tree::PlanTree t = plan::Planner(g, {}).expand_tree();
};

// Loopback wire client.
class Client {
 public:
  explicit Client(int port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(static_cast<std::uint16_t>(port));
    ::inet_pton(AF_INET, "127.0.0.1", &sa.sin_addr);
    REQUIRE(::connect(fd_, reinterpret_cast<sockaddr*>(&sa), sizeof sa) == 0);
  }
  ~Client() { ::close(fd_); }

  void send_raw(const std::string& s) { REQUIRE(::send(fd_, s.data(), s.size(), MSG_NOSIGNAL) == (ssize_t)s.size()); }
  void send(const json& j) { send_raw(j.dump() + "\n"); }

  // Next frame, or null once the server has closed the connection.
  json next() {
    for (;;) {
      if (auto nl = buf_.find('\n'); nl != std::string::npos) {
        auto line = buf_.substr(0, nl);
        buf_.erase(0, nl + 1);
        return json::parse(line);
      }
      pollfd p{fd_, POLLIN, 0};
      REQUIRE(::poll(&p, 1, 10'000) == 1);
      char chunk[4096];
      auto n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n <= 0) return nullptr;
      buf_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  // Skips hello and node frames up to the next query, done or err frame.
  json until_query(std::vector<json>* nodes = nullptr) {
    for (;;) {
      auto f = next();
      if (!f.is_null() && f["t"] == "hello") continue;
      if (f.is_null() || f["t"] != "node") return f;
      if (nodes) nodes->push_back(f);
    }
  }

 private:
  int fd_ = -1;
  std::string buf_;
};

struct ServerRun {
  std::optional<exec::ExecutionLog> log;
  std::string error_code;
};

std::future<ServerRun> serve_async(exec::SessionServer& server, const tree::PlanTree& t,
                                   const ground::GroundProblem& g, exec::SessionOptions opt = {}) {
  return std::async(std::launch::async, [&server, &t, &g, opt] {
    ServerRun r;
    try {
      r.log = server.serve(t, g, opt);
    } catch (const ExecError& e) {
      r.error_code = e.code();
    }
    return r;
  });
}

std::vector<int> leftmost_path(const tree::PlanTree& t) {
  std::vector<int> path{t.root};
  while (!t.node(path.back()).children.empty()) path.push_back(t.node(path.back()).children[0].child);
  return path;
}

std::vector<int> ids(const exec::ExecutionLog& log) {
  std::vector<int> out;
  for (const auto& r : log.records) out.push_back(r.node);
  return out;
}

// Records must walk parent to child from the root and end in a leaf.
void check_path(const tree::PlanTree& t, const exec::ExecutionLog& log) {
  REQUIRE(!log.records.empty());
  CHECK(log.records.front().node == t.root);
  for (std::size_t i = 0; i + 1 < log.records.size(); ++i) {
    const auto& n = t.node(log.records[i].node);
    bool linked = false;
    for (const auto& e : n.children)
      linked = linked || (e.child == log.records[i + 1].node && e.outcome == log.records[i].outcome);
    CHECK(linked);
  }
  CHECK(t.node(log.records.back().node).kind == tree::NodeKind::Leaf);
}

}  // namespace

TEST_CASE("prompt templates") {
  Planned p;
  auto prompt = [&](const std::string& name, const std::vector<std::string>& args) {
    return exec::prompt_text(p.g.action(*p.g.find_action(name, args)), p.g);
  };
  CHECK(prompt("askHelp", {"leg2", "top1", "c2"}) ==
        "I cannot reach leg2 with either arm. Could you attach leg2 to top1 at c2? (accept/decline)");
  CHECK(prompt("requestToUnhold", {"leg1"}) == "Please put down leg1.");
  CHECK(prompt("requestToAttach", {"leg2", "top1", "c2"}) == "Please attach leg2 to top1 at c2.");
  CHECK(prompt("offerHelp", {"foot1", "leg1", "f1"}) ==
        "foot1 is dangerous, so I will not ask you to hand it over. Shall I help you attach foot1 to leg1 at f1? "
        "(accepted/declined)");
  CHECK(prompt("confirmAttach", {"leg2", "top1"}) ==
        "I see you holding leg2. Are you going to attach leg2 to top1? (yes/no)");

  // Reply options match the edge labels of the planned node.
  for (const auto& n : p.t.nodes)
    if (n.action == "confirmAttach" || n.action == "askHelp" || n.action == "offerHelp") {
      std::string opts;
      for (const auto& e : n.children) opts += (opts.empty() ? "" : "/") + *e.outcome;
      auto text = exec::prompt_text(p.g.action(*p.g.find_action(n.action, n.args)), p.g);
      CHECK(text.substr(text.size() - opts.size() - 2) == "(" + opts + ")");
    }

  // Every communication action of the domain has its own template.
  std::set<std::string> kinds;
  for (const auto& a : p.g.actions())
    if (adl::is_communication(a.kind)) {
      kinds.insert(a.name);
      CHECK(exec::prompt_text(a, p.g).rfind(a.to_string(), 0) != 0);
    }
  CHECK(kinds.size() == 5);
}

TEST_CASE("leftmost answers follow the leftmost branch") {
  Planned p;
  exec::LeftmostProvider left;
  std::ostringstream out;
  auto log = exec::run(p.t, p.g, left, &out);
  CHECK(ids(log) == leftmost_path(p.t));
  CHECK(log.leaf_path() == "0>1>2>3>4>5>6");
  // Streamed lines match the records.
  std::istringstream in(out.str());
  std::size_t i = 0;
  for (std::string line; std::getline(in, line); ++i) {
    auto j = json::parse(line);
    REQUIRE(i < log.records.size());
    CHECK(j["node"] == log.records[i].node);
    CHECK(j["action"] == log.records[i].action);
  }
  CHECK(i == log.records.size());
  CHECK(log.records[2].outcome == "accept");
  CHECK(log.records[2].prompt->find("I cannot reach leg2") == 0);
  CHECK(log.records.back().action == "goal");
}

TEST_CASE("scripted answers") {
  Planned p;
  // decline the help request, then foot1 is free, leg2 is held, the human will attach it.
  exec::ScriptedProvider script({"decline", "unholding", "holding", "yes"});
  auto log = exec::run(p.t, p.g, script);
  check_path(p.t, log);
  std::vector<std::string> acts;
  for (const auto& r : log.records) acts.push_back(r.action);
  CHECK(acts == std::vector<std::string>{"hold(left,leg1)", "attach(left,leg1,top1,c1)", "askHelp(leg2,top1,c2)",
                                         "senseHumanUnholding(foot1)", "hold(left,foot1)",
                                         "attach(left,foot1,leg1,f1)", "senseHumanUnholding(leg2)",
                                         "confirmAttach(leg2,top1)", "requestToAttach(leg2,top1,c2)", "goal"});

  exec::ScriptedProvider bad({"perhaps"});
  CHECK_THROWS_WITH_AS(exec::run(p.t, p.g, bad), doctest::Contains("'perhaps' is not an outcome"), ExecError);
  try {
    exec::ScriptedProvider b({"perhaps"});
    exec::run(p.t, p.g, b);
  } catch (const ExecError& e) {
    CHECK(e.code() == "invalid-outcome");
  }

  exec::ScriptedProvider short_script({"decline"});
  try {
    exec::run(p.t, p.g, short_script);
    FAIL("expected exhaustion");
  } catch (const ExecError& e) {
    CHECK(e.code() == "script-exhausted");
  }

  auto broken = p.t;
  broken.nodes[2].children[0].outcome = "maybe";
  exec::LeftmostProvider left;
  try {
    exec::run(broken, p.g, left);
    FAIL("expected invalid tree");
  } catch (const ExecError& e) {
    CHECK(e.code() == "invalid-tree");
  }
}

TEST_CASE("random answers are seeded") {
  Planned p;
  for (std::uint32_t seed : {7u, 8u, 9u}) {
    exec::RandomProvider a(seed), b(seed);
    auto la = exec::run(p.t, p.g, a);
    auto lb = exec::run(p.t, p.g, b);
    CHECK(la.leaf_path() == lb.leaf_path());
    check_path(p.t, la);
  }
}

TEST_CASE("random answers reach every leaf of small trees") {
  adl::DomainSpec dom = adl::parse_domain(assembly::domain_text());
  auto ws = std::make_shared<const feas::Workspace>(assembly::canonical_workspace());
  int trees = 0;
  for (const auto& inst : oracle::micro_instances()) {
    auto fx = feas::FeasibilityOracle::for_workspace(ws);
    auto g = ground::ground(dom, inst, *fx);
    plan::PlannerConfig cfg;
    cfg.max_horizon = 8;
    tree::PlanTree t;
    try {
      t = plan::Planner(g, cfg).expand_tree();
    } catch (const plan::Unsolvable&) {
      continue;
    }
    auto m = tree::metrics(t);
    if (m.DN < 1 || m.DN > 3) continue;
    ++trees;
    CAPTURE(inst.name);
    std::set<int> leaves;
    for (std::uint32_t seed = 1; seed <= 200; ++seed) {
      exec::RandomProvider r(seed);
      auto log = exec::run(t, g, r);
      check_path(t, log);
      leaves.insert(log.records.back().node);
    }
    CHECK(static_cast<int>(leaves.size()) == m.L);
  }
  CHECK(trees >= 3);
}

TEST_CASE("wire session: scripted client reaches a leaf") {
  Planned p;
  exec::SessionServer server;
  auto fut = serve_async(server, p.t, p.g);
  Client c(server.port());
  auto hello = c.next();
  CHECK(hello["t"] == "hello");
  CHECK(hello["protocol"] == exec::kProtocolVersion);
  CHECK(hello["tree"]["nodes"].size() == p.t.nodes.size());
  CHECK(!hello["tree"].contains("timings"));

  std::vector<json> nodes;
  for (std::string answer : {"decline", "unholding", "holding"}) {
    auto q = c.until_query(&nodes);
    REQUIRE(q["t"] == "query");
    c.send({{"t", "answer"}, {"id", q["id"]}, {"outcome", answer}});
  }
  auto q = c.until_query(&nodes);
  REQUIRE(q["t"] == "query");
  CHECK(q["prompt"] == "I see you holding leg2. Are you going to attach leg2 to top1? (yes/no)");
  CHECK(q["outcomes"] == json::array({"yes", "no"}));
  c.send({{"t", "answer"}, {"id", q["id"]}, {"outcome", "yes"}});

  std::vector<json> after;
  auto done = c.until_query(&after);
  REQUIRE(done["t"] == "done");
  REQUIRE(!after.empty());
  // Saying yes leads to the branch where the human attaches leg2.
  CHECK(after[0]["action"] == "requestToAttach(leg2,top1,c2)");
  CHECK(after.back()["kind"] == "leaf");

  int leg2_attached = 0;
  for (const auto& r : done["log"]) {
    std::string a = r["action"];
    if (a.rfind("attach(left,leg2,", 0) == 0 || a.rfind("attach(right,leg2,", 0) == 0 ||
        a.rfind("requestToAttach(leg2,", 0) == 0)
      ++leg2_attached;
  }
  CHECK(leg2_attached == 1);

  auto r = fut.get();
  REQUIRE(r.log);
  CHECK(r.log->records.size() == done["log"].size());
  check_path(p.t, *r.log);
}

TEST_CASE("wire session: invalid answers and busy endpoint") {
  Planned p;
  exec::SessionServer server;
  {
    auto fut = serve_async(server, p.t, p.g);
    Client c(server.port());
    auto q = c.until_query();
    REQUIRE(q["t"] == "query");

    // A second teammate is turned away while the first session runs.
    Client other(server.port());
    auto busy = other.next();
    CHECK(busy["t"] == "err");
    CHECK(busy["code"] == "busy");

    c.send({{"t", "answer"}, {"id", q["id"]}, {"outcome", "sure"}});
    auto err = c.until_query();
    CHECK(err["t"] == "err");
    CHECK(err["code"] == "invalid-outcome");
    CHECK(c.next().is_null());
    CHECK(fut.get().error_code == "invalid-outcome");
  }
  {
    // The server takes the next session after the failed one.
    auto fut = serve_async(server, p.t, p.g);
    Client c(server.port());
    c.until_query();
    c.send_raw("this is not json\n");
    auto err = c.until_query();
    CHECK(err["code"] == "malformed-frame");
    CHECK(fut.get().error_code == "malformed-frame");
  }
  {
    auto fut = serve_async(server, p.t, p.g);
    Client c(server.port());
    c.until_query();
    c.send({{"t", "answer"}, {"id", 99}, {"outcome", "accept"}});
    CHECK(c.until_query()["code"] == "malformed-frame");
    fut.get();
  }
  {
    auto fut = serve_async(server, p.t, p.g, {std::chrono::milliseconds(100)});
    Client c(server.port());
    c.until_query();
    auto err = c.until_query();
    CHECK(err["code"] == "timeout");
    CHECK(fut.get().error_code == "timeout");
  }
}

TEST_CASE("listen addresses") {
  CHECK(exec::parse_listen("127.0.0.1:7070") == std::pair<std::string, int>{"127.0.0.1", 7070});
  CHECK(exec::parse_listen(":0") == std::pair<std::string, int>{"127.0.0.1", 0});
  CHECK(exec::parse_listen("7071").second == 7071);
  CHECK_THROWS_AS(exec::parse_listen("host:port"), ExecError);
  CHECK_THROWS_AS(exec::parse_listen("1.2.3.4:99999"), ExecError);
  CHECK_THROWS_AS(exec::SessionServer("not-an-ip", 0), ExecError);
}

#include "cohap/executor.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <ostream>

#include "json.hpp"

namespace cohap::exec {

using json = nlohmann::json;

std::string ScriptedProvider::choose(const Query& q) {
  if (next_ >= script_.size())
    throw ExecError("script-exhausted", "script has no answer left for " + q.action);
  return script_[next_++];
}

std::string ExecutionLog::leaf_path() const {
  std::string s;
  for (const auto& r : records) s += (s.empty() ? "" : ">") + std::to_string(r.node);
  return s;
}

namespace {

json record_json(const LogRecord& r) {
  json j{{"node", r.node}, {"kind", tree::to_string(r.kind)}, {"action", r.action}, {"wallclock", r.wallclock}};
  if (r.prompt) j["prompt"] = *r.prompt;
  if (r.outcome) j["outcome"] = *r.outcome;
  return j;
}

std::string options(const ground::GroundAction& a) {
  if (a.outcomes.empty()) return "";
  std::string s;
  for (const auto& o : a.outcomes) s += (s.empty() ? "" : "/") + o.label;
  return " (" + s + ")";
}

}  // namespace

std::string to_json(const LogRecord& r) { return record_json(r).dump(); }

std::string to_jsonl(const ExecutionLog& log) {
  std::string s;
  for (const auto& r : log.records) s += to_json(r) + "\n";
  return s;
}

std::string prompt_text(const ground::GroundAction& a, const ground::GroundProblem& p) {
  const auto& x = a.args;
  auto arg = [&](std::size_t i) { return i < x.size() ? x[i] : std::string("?"); };
  std::string body;
  if (a.name == "askHelp") {
    bool unreachable = true;
    try {
      for (const auto& m : p.members("manip"))
        unreachable = unreachable && p.failure_holds("reachabilityFail", {m, arg(0)}, p.initial());
    } catch (const std::exception&) {
      unreachable = false;  // domain without arms or reachability
    }
    body = (unreachable ? "I cannot reach " + arg(0) + " with either arm. "
                        : "I need a hand with " + arg(0) + ". ") +
           "Could you attach " + arg(0) + " to " + arg(1) + " at " + arg(2) + "?";
  } else if (a.name == "offerHelp") {
    body = arg(0) + " is dangerous, so I will not ask you to hand it over. Shall I help you attach " + arg(0) +
           " to " + arg(1) + " at " + arg(2) + "?";
  } else if (a.name == "confirmAttach") {
    body = "I see you holding " + arg(0) + ". Are you going to attach " + arg(0) + " to " + arg(1) + "?";
  } else if (a.name == "requestToUnhold") {
    body = "Please put down " + arg(0) + ".";
  } else if (a.name == "requestToAttach") {
    body = "Please attach " + arg(0) + " to " + arg(1) + " at " + arg(2) + ".";
  } else {
    body = a.to_string() + "?";
  }
  return body + options(a);
}

std::string sensing_text(const ground::GroundAction& a) { return "Observe " + a.to_string() + options(a); }

ExecutionLog run(const tree::PlanTree& t, const ground::GroundProblem& p, OutcomeProvider& provider,
                 std::ostream* log_out) {
  if (auto v = tree::replay_validate(t, p); !v.empty())
    throw ExecError("invalid-tree", "tree does not replay: " + v.front().message);
  ExecutionLog log;
  auto t0 = std::chrono::steady_clock::now();
  auto emit = [&](LogRecord r) {
    r.wallclock = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (log_out) *log_out << to_json(r) << '\n' << std::flush;
    log.records.push_back(std::move(r));
  };

  ground::BeliefState s = p.initial();
  int id = t.root;
  for (;;) {
    const auto& n = t.node(id);
    provider.visit(n);
    LogRecord rec;
    rec.node = id;
    rec.kind = n.kind;
    if (n.kind == tree::NodeKind::Leaf) {
      rec.action = "goal";
      emit(std::move(rec));
      if (!p.goal_reached(s)) throw ExecError("invalid-tree", "leaf reached without the goal");
      return log;
    }
    const auto& a = p.action(*p.find_action(n.action, n.args));
    rec.action = n.label();
    if (n.kind == tree::NodeKind::CommDet || n.kind == tree::NodeKind::CommNondet) rec.prompt = prompt_text(a, p);
    if (!tree::is_decision(n.kind)) {
      emit(std::move(rec));
      s = p.successor(s, a, std::nullopt);
      id = n.children[0].child;
      continue;
    }
    Query q;
    q.node = id;
    q.action = rec.action;
    q.prompt = rec.prompt ? *rec.prompt : sensing_text(a);
    for (const auto& e : n.children) q.outcomes.push_back(*e.outcome);
    auto answer = provider.choose(q);
    const tree::Edge* edge = nullptr;
    for (const auto& e : n.children)
      if (*e.outcome == answer) edge = &e;
    if (!edge)
      throw ExecError("invalid-outcome", "'" + answer + "' is not an outcome of " + rec.action + " at node " +
                                             std::to_string(id));
    int o = 0;
    while (a.outcomes[o].label != answer) ++o;
    rec.prompt = q.prompt;
    rec.outcome = answer;
    emit(std::move(rec));
    s = p.successor(s, a, o);
    id = edge->child;
  }
}

// --- wire session ---

std::pair<std::string, int> parse_listen(const std::string& addr) {
  auto colon = addr.rfind(':');
  std::string host = colon == std::string::npos ? "127.0.0.1" : addr.substr(0, colon);
  std::string port = colon == std::string::npos ? addr : addr.substr(colon + 1);
  if (host.empty()) host = "127.0.0.1";
  try {
    std::size_t used = 0;
    int p = std::stoi(port, &used);
    if (used != port.size() || p < 0 || p > 65535) throw std::invalid_argument(port);
    return {host, p};
  } catch (const std::exception&) {
    throw ExecError("bind", "bad listen address '" + addr + "' (want host:port)");
  }
}

SessionServer::SessionServer(const std::string& host, int port) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw ExecError("bind", std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &sa.sin_addr) != 1) {
    ::close(listen_fd_);
    throw ExecError("bind", "not an IPv4 address: " + host);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&sa), sizeof sa) < 0 || ::listen(listen_fd_, 4) < 0) {
    std::string why = std::strerror(errno);
    ::close(listen_fd_);
    throw ExecError("bind", "cannot listen on " + host + ":" + std::to_string(port) + ": " + why);
  }
  socklen_t len = sizeof sa;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&sa), &len);
  port_ = ntohs(sa.sin_port);
}

SessionServer::~SessionServer() {
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

namespace {

void send_line(int fd, const json& j) {
  auto s = j.dump() + "\n";
  const char* p = s.data();
  std::size_t left = s.size();
  while (left > 0) {
    auto n = ::send(fd, p, left, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw ExecError("disconnected", "client went away");
    p += n;
    left -= static_cast<std::size_t>(n);
  }
}

void refuse(int listen_fd) {
  int fd = ::accept(listen_fd, nullptr, nullptr);
  if (fd < 0) return;
  try {
    send_line(fd, {{"t", "err"}, {"code", "busy"}, {"message", "another session is running"}});
  } catch (const ExecError&) {
  }
  ::close(fd);
}

class Connection {
 public:
  Connection(int fd, int listen_fd) : fd_(fd), listen_fd_(listen_fd) {}
  ~Connection() { ::close(fd_); }

  void send(const json& j) { send_line(fd_, j); }

  /// Next frame; other clients are turned away while waiting.
  json receive(std::chrono::milliseconds timeout) {
    auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      if (auto nl = buf_.find('\n'); nl != std::string::npos) {
        auto line = buf_.substr(0, nl);
        buf_.erase(0, nl + 1);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
          return json::parse(line);
        } catch (const json::exception&) {
          throw ExecError("malformed-frame", "frame is not JSON: " + line.substr(0, 80));
        }
      }
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw ExecError("timeout", "no answer within " + std::to_string(timeout.count()) + " ms");
      pollfd fds[2] = {{fd_, POLLIN, 0}, {listen_fd_, POLLIN, 0}};
      int r = ::poll(fds, 2, static_cast<int>(left.count()));
      if (r < 0 && errno == EINTR) continue;
      if (r < 0) throw ExecError("disconnected", std::string("poll: ") + std::strerror(errno));
      if (fds[1].revents & POLLIN) refuse(listen_fd_);
      if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
        char chunk[4096];
        auto n = ::recv(fd_, chunk, sizeof chunk, 0);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) throw ExecError("disconnected", "client closed the session");
        buf_.append(chunk, static_cast<std::size_t>(n));
      }
    }
  }

 private:
  int fd_;
  int listen_fd_;
  std::string buf_;
};

class WireProvider : public OutcomeProvider {
 public:
  WireProvider(Connection& c, std::chrono::milliseconds timeout) : c_(c), timeout_(timeout) {}

  void visit(const tree::Node& n) override {
    c_.send({{"t", "node"},
             {"id", n.id},
             {"kind", tree::to_string(n.kind)},
             {"action", n.kind == tree::NodeKind::Leaf ? "goal" : n.label()}});
  }

  std::string choose(const Query& q) override {
    c_.send({{"t", "query"}, {"id", q.node}, {"prompt", q.prompt}, {"outcomes", q.outcomes}});
    auto f = c_.receive(timeout_);
    if (!f.is_object() || f.value("t", "") != "answer" || !f.contains("outcome") || !f["outcome"].is_string())
      throw ExecError("malformed-frame", "expected {\"t\":\"answer\",\"id\":..,\"outcome\":..}, got " + f.dump());
    if (f.contains("id") && f["id"] != q.node)
      throw ExecError("malformed-frame", "answer for node " + f["id"].dump() + " while node " +
                                             std::to_string(q.node) + " is pending");
    return f["outcome"].get<std::string>();
  }

 private:
  Connection& c_;
  std::chrono::milliseconds timeout_;
};

}  // namespace

ExecutionLog SessionServer::serve(const tree::PlanTree& t, const ground::GroundProblem& p, const SessionOptions& opt,
                                  std::ostream* log_out) {
  int fd;
  do {
    fd = ::accept(listen_fd_, nullptr, nullptr);
  } while (fd < 0 && errno == EINTR);
  if (fd < 0) throw ExecError("disconnected", std::string("accept: ") + std::strerror(errno));
  Connection c(fd, listen_fd_);
  try {
    auto tree_copy = t;
    tree_copy.timings.reset();
    c.send({{"t", "hello"}, {"protocol", kProtocolVersion}, {"tree", json::parse(tree::to_json(tree_copy))}});
    WireProvider provider(c, opt.timeout);
    auto log = run(t, p, provider, log_out);
    json records = json::array();
    for (const auto& r : log.records) records.push_back(record_json(r));
    c.send({{"t", "done"}, {"log", records}});
    return log;
  } catch (const ExecError& e) {
    try {
      c.send({{"t", "err"}, {"code", e.code()}, {"message", e.what()}});
    } catch (const ExecError&) {
    }
    throw;
  }
}

}  // namespace cohap::exec

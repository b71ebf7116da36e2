// Plan execution against an outcome provider, and the teammate wire session.
#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "cohap/grounder.hpp"
#include "cohap/plantree.hpp"

namespace cohap::exec {

inline constexpr int kProtocolVersion = 1;

/// `code` is the wire error code: invalid-outcome, timeout, malformed-frame,
/// script-exhausted, disconnected, invalid-tree, busy.
class ExecError : public std::runtime_error {
 public:
  ExecError(std::string code, const std::string& what) : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

struct Query {
  int node = -1;
  std::string action;  // "confirmAttach(leg2,top1)"
  std::string prompt;
  std::vector<std::string> outcomes;  // edge labels in tree order
};

class OutcomeProvider {
 public:
  virtual ~OutcomeProvider() = default;
  /// Called for every node on the path before it is acted on.
  virtual void visit(const tree::Node&) {}
  virtual std::string choose(const Query& q) = 0;
};

/// Answers from a fixed list, in order.
class ScriptedProvider : public OutcomeProvider {
 public:
  explicit ScriptedProvider(std::vector<std::string> script) : script_(std::move(script)) {}
  std::string choose(const Query& q) override;

 private:
  std::vector<std::string> script_;
  std::size_t next_ = 0;
};

/// Always the first edge.
class LeftmostProvider : public OutcomeProvider {
 public:
  std::string choose(const Query& q) override { return q.outcomes.front(); }
};

/// Uniform over the node's edges.
class RandomProvider : public OutcomeProvider {
 public:
  explicit RandomProvider(std::uint32_t seed) : rng_(seed) {}
  std::string choose(const Query& q) override { return q.outcomes[rng_() % q.outcomes.size()]; }

 private:
  std::mt19937 rng_;
};

struct LogRecord {
  int node = -1;
  tree::NodeKind kind = tree::NodeKind::Leaf;
  std::string action;  // label, "goal" for the leaf
  std::optional<std::string> prompt;
  std::optional<std::string> outcome;
  double wallclock = 0.0;  // seconds since the start of the run
};

struct ExecutionLog {
  std::vector<LogRecord> records;
  std::string leaf_path() const;  // "0>1>2>5", node ids along the path
};

std::string to_json(const LogRecord& r);  // one line, no newline
std::string to_jsonl(const ExecutionLog& log);

/// Spoken text for a communication action: the request plus the reason the
/// robot is asking, ending with the reply options.
std::string prompt_text(const ground::GroundAction& a, const ground::GroundProblem& p);

/// Question put to the world stand-in for a sensing action.
std::string sensing_text(const ground::GroundAction& a);

/// Walks `t` from the root. Throws ExecError on an invalid tree, a non-edge
/// answer or a provider failure. Each record is written to `log_out` as a
/// JSON line when it happens.
ExecutionLog run(const tree::PlanTree& t, const ground::GroundProblem& p, OutcomeProvider& provider,
                 std::ostream* log_out = nullptr);

struct SessionOptions {
  std::chrono::milliseconds timeout{120'000};  // per query
};

/// One-client-at-a-time NDJSON server on a local TCP port.
///
///   server: {"t":"hello","protocol":1,"tree":{...}}
///           {"t":"node","id":3,"kind":"commNondet","action":"askHelp(leg2,top1,c2)"}
///           {"t":"query","id":3,"prompt":"...","outcomes":["accept","decline"]}
///   client: {"t":"answer","id":3,"outcome":"decline"}
///   server: {"t":"done","log":[...]}  or  {"t":"err","code":"invalid-outcome","message":"..."}
///
/// A second client connecting mid-session gets an err frame with code "busy".
class SessionServer {
 public:
  /// `port` 0 picks a free port. Throws ExecError("bind") on failure.
  explicit SessionServer(const std::string& host = "127.0.0.1", int port = 0);
  ~SessionServer();
  SessionServer(const SessionServer&) = delete;
  SessionServer& operator=(const SessionServer&) = delete;

  int port() const { return port_; }

  /// Waits for a client and runs one session. Returns the log on success;
  /// on failure the client has been sent an err frame and ExecError is thrown.
  ExecutionLog serve(const tree::PlanTree& t, const ground::GroundProblem& p, const SessionOptions& opt = {},
                     std::ostream* log_out = nullptr);

 private:
  int listen_fd_ = -1;
  int port_ = 0;
};

/// "host:port" or ":port"; throws ExecError("bind") on a malformed address.
std::pair<std::string, int> parse_listen(const std::string& addr);

}  // namespace cohap::exec

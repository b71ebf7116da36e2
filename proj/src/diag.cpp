#include "cohap/diag.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>

namespace cohap::diag {

namespace {

Level from_env() {
  const char* v = std::getenv("COHAP_LOG");
  if (!v) return Level::Warn;
  std::string s(v);
  if (s == "error") return Level::Error;
  if (s == "info") return Level::Info;
  if (s == "debug") return Level::Debug;
  return Level::Warn;
}

std::atomic<int>& current() {
  static std::atomic<int> lvl{static_cast<int>(from_env())};
  return lvl;
}

const char* name(Level l) {
  switch (l) {
    case Level::Error: return "error";
    case Level::Warn: return "warn";
    case Level::Info: return "info";
    case Level::Debug: return "debug";
  }
  return "?";
}

}  // namespace

Level threshold() { return static_cast<Level>(current().load()); }
void set_threshold(Level l) { current().store(static_cast<int>(l)); }
bool enabled(Level l) { return static_cast<int>(l) <= current().load(); }

void record(Level l, const std::string& event, const std::string& fields) {
  if (!enabled(l)) return;
  static std::mutex mu;
  std::lock_guard lock(mu);
  std::cerr << "{\"lvl\":\"" << name(l) << "\",\"ev\":\"" << event << "\"";
  if (!fields.empty()) std::cerr << "," << fields;
  std::cerr << "}\n";
}

}  // namespace cohap::diag

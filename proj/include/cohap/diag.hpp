// Diagnostic records on stderr, filtered by COHAP_LOG (error|warn|info|debug).
#pragma once

#include <string>

namespace cohap::diag {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

Level threshold();
void set_threshold(Level l);
bool enabled(Level l);

/// Emits one JSON object per line, e.g. {"lvl":"info","ev":"ground",...}.
/// `fields` is the body of a JSON object without braces.
void record(Level l, const std::string& event, const std::string& fields);

}  // namespace cohap::diag

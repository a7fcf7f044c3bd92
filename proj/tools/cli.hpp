#pragma once

#include <string>
#include <vector>

namespace ehub::cli {

inline constexpr const char* kToolVersion = "0.1.0";

// Parses and executes one command line, e.g. {"gen-data", "--config", "c.json"}.
// Returns the process exit code: 0 success, 1 runtime failure, 2 config or
// usage error.
int run(const std::vector<std::string>& args);

} // namespace ehub::cli

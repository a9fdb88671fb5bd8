#pragma once

#include <string>
#include <vector>

namespace melpc::cli {

// Full CLI entry point; returns the process exit code (0 ok, 2 usage,
// 3 data error, 4 numeric divergence). Errors print one line to stderr as
// `error_code: message`.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);  // args without argv[0]

}  // namespace melpc::cli

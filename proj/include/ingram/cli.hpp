#pragma once

#include <string>
#include <vector>

namespace ingram {

// Entry point shared by the binary and the integration tests. `args` is the
// full argv including the program name. Returns the process exit code:
// 0 success, 1 runtime error, 2 usage error.
int run_cli(const std::vector<std::string>& args);

}  // namespace ingram

#pragma once

#include <string>
#include <vector>

namespace cmech {

// Full command-line entry point: `args` includes the program name. Returns
// the process exit code (0 ok, 2 input error, 3 solver failure, 4 the
// adaptive decision was Stop).
int run_cli(const std::vector<std::string>& args);

}  // namespace cmech

#pragma once

#include <string>
#include <vector>

namespace drex {

// Full command-line surface behind the binary; exposed so tests can drive
// verbs in-process. args excludes the program name. Exit codes: 0 success,
// 1 internal or numeric failure, 2 usage or input error.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, const char* const* argv);

}  // namespace drex

#pragma once

// The `lfrefine` command line tool as a library so tests can drive it
// in-process.

#include <ostream>
#include <string>
#include <vector>

namespace lfrefine::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kValidation = 2,
  kRuntime = 3,
};

// Runs one invocation. `args` excludes the program name. Human output goes to
// `out`; errors and warnings go to `err` as one-line key=value records.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        bool color = false);

}  // namespace lfrefine::cli

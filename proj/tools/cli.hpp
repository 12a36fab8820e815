#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rantwin::cli {

// Exit-code contract for scripting.
enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kConfig = 2,
  kIo = 3,
  kNumeric = 4,
  kPipeline = 5,
};

// Runs one command line (without the program name). Output and diagnostics
// go to the given streams so tests can drive the CLI in-process.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rantwin::cli

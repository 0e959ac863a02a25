#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gaitgate::cli {

enum ExitCode : int {
  kOk = 0,
  kReject = 1,
  kBadArgs = 2,
  kIoError = 3,
  kNumericError = 4,
  kUnknownUser = 5,
};

// Runs one gaitgate command line (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gaitgate::cli

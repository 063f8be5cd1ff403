#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace contpop::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int {
  kOk = 0,
  kFailed = 1,
  kConfigError = 2,
  kNumericalError = 3,
};

/// Runs the command line tool; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace contpop::cli

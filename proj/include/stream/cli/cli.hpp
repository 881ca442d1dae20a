#pragma once

// The `stream` command line: verify, bench, train, infer and convert.

#include <iosfwd>
#include <string>
#include <vector>

namespace stream::cli {

enum ExitCode : int {
  kOk = 0,
  kVerificationFailed = 1,
  kUsageError = 2,
  kDataError = 3,
};

/// Runs one command. args[0] is the program name. The resolved configuration
/// and diagnostics go to `err`; reports and results go to `out`.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace stream::cli

#pragma once

#include <iosfwd>

namespace sbf::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,  // bad flags, config, or input file
  kRuntimeError = 3,
  kFitDegenerate = 4,
};

/// Entry point of the sbf tool. Human-readable output goes to `out`, diagnostics to `err`;
/// result files go to the output directory.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sbf::cli

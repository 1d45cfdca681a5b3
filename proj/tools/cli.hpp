#pragma once

#include <iosfwd>

namespace fedcf::cli {

enum ExitCode : int {
  kOk = 0,
  kInternalError = 1,
  kConfigError = 2,
  kPipelineError = 3,
};

/// Entry point of the `fedcf` tool; writes human-readable output to `out`
/// and diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fedcf::cli

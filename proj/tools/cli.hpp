#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace auxcodec::cli {

enum ExitCode {
  kExitOk = 0,
  kExitRuntime = 1,
  kExitUsage = 2,
  kExitFormat = 3,
  kExitModelMismatch = 4,
  kExitDivergence = 5,
};

/// Runs one command line. Results go to out, the resolved configuration and
/// diagnostics to err.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace auxcodec::cli

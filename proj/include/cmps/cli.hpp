#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cmps {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitEvalFail = 1,
  kExitConfig = 2,  ///< bad config, flags, or input file
  kExitDtMismatch = 3,
  kExitNumeric = 4,  ///< non-finite loss or a collapsed trajectory
};

/// Runs `cmps <args...>` in-process. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cmps

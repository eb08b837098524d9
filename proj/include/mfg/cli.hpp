#pragma once

#include <iosfwd>

namespace mfg {

enum ExitCode { kExitOk = 0, kExitConfig = 2, kExitNoConvergence = 3, kExitRuntime = 4 };

/// Entry point of the `mfg` tool: check | solve | study | report.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mfg

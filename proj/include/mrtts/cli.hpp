#pragma once

#include <iosfwd>

namespace mrtts {

// Entry point of the `mrtts` tool. Returns the process exit code (see
// ExitCode); all diagnostics go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mrtts

#pragma once

namespace ica_lab {

/// Exit codes of the command-line tool.
constexpr int kExitOk = 0;          // all requested checks passed
constexpr int kExitSchema = 2;      // config/checkpoint schema violation
constexpr int kExitNumeric = 3;     // a check failed or a computation broke down

/// Entry point used by tools/main.cpp (and by the CLI tests in-process).
int run_cli(int argc, const char* const* argv);

}  // namespace ica_lab

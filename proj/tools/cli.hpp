#pragma once

#include <iosfwd>

namespace lprobe::cli {

enum ExitCode : int { ok = 0, validation_failure = 1, usage_error = 2, runtime_error = 3 };

// Entry point shared by the `lprobe` binary and the CLI tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lprobe::cli

#pragma once

// Command-line front end. Exit codes: 0 all verdicts pass, 1 a verdict
// failed, 2 usage or parse error, 3 invalid configuration or model domain
// error, 4 file system error.

#include <iosfwd>

namespace fpension {

enum ExitCode : int {
    kExitOk = 0,
    kExitVerdictFailed = 1,
    kExitUsage = 2,
    kExitValidation = 3,
    kExitIo = 4,
};

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "FPENSION_OUTPUT_DIR";

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace fpension

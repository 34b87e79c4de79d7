#pragma once

// The `homoenc` command line: gen-data, train, eval, sweep, verify.

#include <string>
#include <vector>

namespace homoenc::cli {

enum ExitCode : int {
  kOk = 0,
  kVerifyFailed = 1,
  kUsage = 2,
  kIo = 3,
  kNumeric = 4,
};

/// Parses and runs one command; returns the process exit code. Errors are
/// reported on stderr, progress on stdout.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

/// Maps the active exception to an exit code (call inside a catch block).
int exit_code_for_current_exception();

/// Seed default: HOMOENC_SEED if set and numeric, else 0.
unsigned long long default_seed();

/// Splices keys of a JSON config object into `args` as `--key value` flags,
/// skipping keys already given on the command line. Arrays become
/// comma-separated lists; true adds a bare flag and false drops it.
std::vector<std::string> merge_config(const std::vector<std::string>& args,
                                      const std::string& config_text);

}  // namespace homoenc::cli

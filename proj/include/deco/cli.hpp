#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace deco::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kDivergence = 3 };

// Runs one subcommand. args excludes the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct SmokeOptions {
  std::filesystem::path out = "smoke-out";
  bool corrupt_checkpoint = false;
};

// End-to-end checks on the bundled synthetic dataset; prints a pass/fail
// table and returns kOk only when every check passed.
int run_smoke(const SmokeOptions& options, std::ostream& out);

}  // namespace deco::cli

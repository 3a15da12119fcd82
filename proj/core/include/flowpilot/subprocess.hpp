#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <stop_token>
#include <string>
#include <vector>

namespace flowpilot {

struct ProcessOptions {
  std::filesystem::path working_directory;
  // stdout and stderr are both appended here when set.
  std::optional<std::filesystem::path> log_file;
  std::map<std::string, std::string> extra_env;
  std::optional<std::chrono::milliseconds> timeout;
  std::stop_token stop;
};

struct ProcessResult {
  int exit_code = 0;   // 128 + signal when killed by a signal
  bool timed_out = false;
  bool cancelled = false;
  std::string output;  // captured stdout+stderr when no log file is given
};

/// Resolves `program` against PATH (or checks it directly when it has a slash).
std::optional<std::filesystem::path> find_executable(const std::string& program);

/// Runs argv in its own process group. On timeout or cancellation the whole
/// group is killed. Throws Error{BackendNotFound} if argv[0] cannot be found.
ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& options = {});

}  // namespace flowpilot

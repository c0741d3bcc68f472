// evopt/subprocess.hpp - Shell command execution with timeout and capture.
#pragma once

#include <filesystem>
#include <string>

namespace evopt {

struct ExecResult {
  int exit_code = -1;
  bool timed_out = false;
  bool spawn_failed = false;
  std::string stdout_text;
  std::string stderr_text;
  double wall_seconds = 0.0;
};

/// Runs `command` through /bin/sh -c in `workdir`, capturing stdout and
/// stderr. The child runs in its own process group; on timeout the whole
/// group receives SIGKILL.
ExecResult run_command(const std::string& command,
                       const std::filesystem::path& workdir,
                       double timeout_seconds);

}  // namespace evopt

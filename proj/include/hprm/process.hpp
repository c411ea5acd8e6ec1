#pragma once

#include "hprm/tag.hpp"

#include <optional>
#include <string>
#include <sys/types.h>
#include <vector>

namespace hprm {

/// A spawned child process. Destroying a still-running child kills it.
class ChildProcess {
 public:
  ChildProcess() = default;
  ChildProcess(ChildProcess&& o) noexcept;
  ChildProcess& operator=(ChildProcess&& o) noexcept;
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;
  ~ChildProcess();

  /// argv[0] is the executable path. The child inherits the environment,
  /// plus `extra_env` entries of the form NAME=value.
  static ChildProcess spawn(const std::vector<std::string>& argv, const std::vector<std::string>& extra_env = {});

  /// Exit status (or 128 + signal), or nullopt if still running after
  /// `timeout`.
  std::optional<int> wait_for(Nanos timeout);
  int wait();
  /// SIGTERM, then SIGKILL if the child has not exited within `grace`.
  void terminate(Nanos grace = std::chrono::seconds(2));

  [[nodiscard]] pid_t pid() const noexcept { return pid_; }
  [[nodiscard]] bool running() const noexcept { return pid_ > 0 && !status_; }
  [[nodiscard]] const std::string& name() const noexcept { return name_; }

 private:
  std::optional<int> reap(bool block);

  pid_t pid_ = -1;
  std::optional<int> status_;
  std::string name_;
};

/// Absolute path of the running executable.
std::string current_executable();
/// Directory part of a path ("." when there is none).
std::string directory_of(const std::string& path);

}  // namespace hprm

#pragma once

#include "hprm/object_store.hpp"

#include <atomic>
#include <memory>
#include <string>

namespace hprm {

struct StoreServerOptions {
  std::string socket_path;
  /// Shared-memory name of the arena; defaults to one derived from the pid.
  std::string shm_name;
  StoreConfig store;
  bool prefault = false;
};

/// The store daemon: one thread runs a poll loop that serializes every
/// metadata operation. Object bytes never pass through it; clients read and
/// write the shared arena directly.
class StoreServer {
 public:
  explicit StoreServer(StoreServerOptions opts);
  ~StoreServer();
  StoreServer(const StoreServer&) = delete;
  StoreServer& operator=(const StoreServer&) = delete;

  /// Serves until stop(). Safe to call from a dedicated thread.
  void run();
  /// Thread-safe; wakes the loop.
  void stop() noexcept;

  [[nodiscard]] const std::string& socket_path() const noexcept;
  [[nodiscard]] const std::string& shm_name() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hprm

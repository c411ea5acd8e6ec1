#pragma once

#include "hprm/tag.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <time.h>

namespace hprm {

/// Host monotonic clock in nanoseconds. CLOCK_MONOTONIC is shared by every
/// process on a host, so readings are comparable across federates.
inline std::int64_t monotonic_now() noexcept {
  timespec ts{};
  ::clock_gettime(CLOCK_MONOTONIC, &ts);
  return static_cast<std::int64_t>(ts.tv_sec) * 1'000'000'000 + ts.tv_nsec;
}

/// Physical clock a federate consults for its time gates.
class Clock {
 public:
  virtual ~Clock() = default;
  [[nodiscard]] virtual std::int64_t now() const noexcept = 0;
};

/// Monotonic clock plus a fixed offset; the offset emulates clock error.
class SystemClock final : public Clock {
 public:
  explicit SystemClock(Nanos offset = Nanos{0}) noexcept : offset_(offset.count()) {}
  [[nodiscard]] std::int64_t now() const noexcept override { return monotonic_now() + offset_; }

 private:
  std::int64_t offset_;
};

/// Manually advanced clock for deterministic tests.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(std::int64_t start = 0) noexcept : now_(start) {}
  [[nodiscard]] std::int64_t now() const noexcept override { return now_.load(); }
  void set(std::int64_t t) noexcept { now_.store(t); }
  void advance(Nanos d) noexcept { now_.fetch_add(d.count()); }

 private:
  std::atomic<std::int64_t> now_;
};

}  // namespace hprm

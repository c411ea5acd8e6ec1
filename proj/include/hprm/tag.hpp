#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>

namespace hprm {

using Nanos = std::chrono::nanoseconds;

/// Superdense logical time: a timestamp in nanoseconds plus a microstep.
///
/// Ordering is lexicographic on (time, microstep). Two reserved encodings sit
/// outside the finite range: never() precedes every finite tag and forever()
/// follows every finite tag. forever() also denotes an empty event queue.
class Tag {
 public:
  using Time = std::int64_t;
  using Microstep = std::uint32_t;

  static constexpr Time kMinTime = std::numeric_limits<Time>::min();
  static constexpr Time kMaxTime = std::numeric_limits<Time>::max();
  static constexpr Microstep kMaxMicrostep = std::numeric_limits<Microstep>::max();

  constexpr Tag() noexcept = default;
  constexpr Tag(Time time, Microstep microstep = 0) noexcept : time_(time), microstep_(microstep) {}

  static constexpr Tag never() noexcept { return {kMinTime, 0}; }
  static constexpr Tag forever() noexcept { return {kMaxTime, kMaxMicrostep}; }

  [[nodiscard]] constexpr Time time() const noexcept { return time_; }
  [[nodiscard]] constexpr Microstep microstep() const noexcept { return microstep_; }

  [[nodiscard]] constexpr bool is_never() const noexcept { return time_ == kMinTime; }
  [[nodiscard]] constexpr bool is_forever() const noexcept { return time_ == kMaxTime; }
  [[nodiscard]] constexpr bool is_finite() const noexcept { return !is_never() && !is_forever(); }

  constexpr auto operator<=>(const Tag&) const noexcept = default;

 private:
  Time time_ = 0;
  Microstep microstep_ = 0;
};

/// Per-connection logical delay. none() is a zero-duration connection that
/// advances the microstep; a zero duration behaves the same way.
class Delay {
 public:
  static constexpr Delay none() noexcept { return Delay{}; }

  /// Throws std::invalid_argument for a negative duration.
  explicit Delay(Nanos value);

  [[nodiscard]] constexpr bool is_none() const noexcept { return none_; }
  [[nodiscard]] constexpr bool is_zero() const noexcept { return none_ || nanos_ == 0; }
  [[nodiscard]] constexpr Nanos value() const noexcept { return Nanos{none_ ? 0 : nanos_}; }

  constexpr bool operator==(const Delay&) const noexcept = default;

 private:
  constexpr Delay() noexcept = default;

  bool none_ = true;
  std::int64_t nanos_ = 0;
};

enum class Ordering { less, equal, greater };

Ordering compare_tags(const Tag& a, const Tag& b) noexcept;

/// Tag carried by a message sent at `g` over a connection with delay `a`.
/// Positive delays reset the microstep; zero delays bump it. Results that
/// would leave the finite range saturate at Tag::forever(). Non-finite tags
/// are returned unchanged.
Tag delay_tag(const Tag& g, const Delay& a) noexcept;

/// Smallest tag strictly greater than `g`.
Tag next_microstep(const Tag& g) noexcept;

std::string to_string(const Tag& tag);
std::ostream& operator<<(std::ostream& os, const Tag& tag);

}  // namespace hprm

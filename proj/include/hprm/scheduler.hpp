#pragma once

#include "hprm/rti.hpp"
#include "hprm/serde.hpp"
#include "hprm/tag.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <vector>

namespace hprm {

using TriggerId = std::uint32_t;

/// A message delivered to a federate input, decoded lazily.
struct Message {
  SerializedPayload payload;
  std::optional<Value> value;
  std::int64_t arrival = 0;  // physical time it became visible to the executor
};

struct Event {
  Tag tag;
  TriggerId trigger = 0;
  std::shared_ptr<Message> message;  // null for timers and pure actions
};

enum class Admission { queued, late, fault };

/// Event queue plus the two tag-advance gates. Pure logic over caller-supplied
/// clock readings, so every gate decision is reproducible in tests.
///
/// Centralized: a tag g may execute once the RTI grant is strictly above g and
/// physical time has reached g.time. Decentralized: once physical time has
/// reached g.time + S, with S the safe-to-process offset.
class Scheduler {
 public:
  Scheduler(CoordinationMode mode, Nanos stp_offset);

  /// Queues `e` unless it arrives at or before a tag that has already begun
  /// executing: that is an ordering fault under centralized coordination and
  /// a safe-to-process violation under decentralized coordination.
  Admission push(Event e);

  [[nodiscard]] Tag head() const noexcept;  // forever when empty
  [[nodiscard]] bool empty() const noexcept { return queue_.empty(); }
  [[nodiscard]] std::size_t size() const noexcept { return queue_.size(); }

  /// Removes and returns every event tagged exactly `g`; `g` must be the head.
  std::vector<Event> take(Tag g);
  /// Marks `g` complete. Throws Error(ordering_fault) unless tags complete in
  /// strictly increasing order.
  void complete(Tag g);

  [[nodiscard]] Tag completed() const noexcept { return completed_; }
  /// The tag whose reactions are running, or completed() between tags.
  [[nodiscard]] Tag current() const noexcept { return current_; }

  void set_grant(Tag g) noexcept;
  [[nodiscard]] Tag grant() const noexcept { return grant_; }

  [[nodiscard]] bool may_execute(Tag g, std::int64_t now) const noexcept;
  /// Physical time at which the clock half of the gate for `g` opens.
  [[nodiscard]] std::int64_t release_time(Tag g) const noexcept;
  /// Whether a federate with nothing left at or before `stop` may halt.
  [[nodiscard]] bool may_halt(Tag stop, std::int64_t now) const noexcept;

  /// The head tag if it differs from the last one returned (centralized NET
  /// reporting); nullopt otherwise.
  std::optional<Tag> net_update();

  [[nodiscard]] CoordinationMode mode() const noexcept { return mode_; }
  [[nodiscard]] Nanos stp_offset() const noexcept { return stp_; }

 private:
  CoordinationMode mode_;
  Nanos stp_;
  std::multimap<Tag, Event> queue_;
  Tag completed_ = Tag::never();
  Tag current_ = Tag::never();
  Tag grant_ = Tag::never();
  std::optional<Tag> last_net_;
};

}  // namespace hprm

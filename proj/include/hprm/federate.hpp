#pragma once

#include "hprm/clock.hpp"
#include "hprm/rti.hpp"
#include "hprm/scheduler.hpp"
#include "hprm/serde.hpp"
#include "hprm/topology.hpp"
#include "hprm/transport.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hprm {

struct FederateConfig {
  std::string id;
  CoordinationMode mode = CoordinationMode::centralized;
  /// Safe-to-process offset S (decentralized only). May be negative.
  Nanos stp_offset{0};
  TimingModel timing;
  std::string rti_address = "127.0.0.1:15045";
  /// Store daemon socket; empty disables the store.
  std::string store_path;
  /// Payloads whose frame would not fit in this many bytes leave the inline
  /// path.
  std::size_t inline_threshold = kDefaultEagerBufferBytes;
  SerdeOptions serde;
  ConnectionOptions transport;
  /// Interface for peer listeners (decentralized).
  std::string listen_host = "127.0.0.1";
  /// Artificial latency added to every inbound frame before the executor
  /// sees it, and extra latency for frames originating at given federates.
  /// Per-link FIFO order is preserved.
  Nanos injected_latency{0};
  std::map<std::string, Nanos, std::less<>> extra_latency_from;
  /// Physical clock used for the gates; defaults to the host monotonic clock.
  std::shared_ptr<Clock> clock;
  /// Keep a per-tag execution trace (see Federate::trace()).
  bool record_trace = false;

  /// Fills id, mode, RTI address, store path and S from HPRM_RTI_ADDR,
  /// HPRM_STORE_PATH, HPRM_MODE and HPRM_STP_OFFSET_NS where set.
  static FederateConfig from_env(std::string id);
};

class Federate;

/// What a reaction sees while it runs.
class ReactionContext {
 public:
  [[nodiscard]] Tag tag() const noexcept { return tag_; }
  [[nodiscard]] Tag start_tag() const noexcept;
  [[nodiscard]] std::int64_t physical_time() const noexcept;

  [[nodiscard]] bool is_present(std::string_view trigger) const;
  /// Decodes the message on first access. Throws Error(precondition) when
  /// the trigger is absent or carries no value.
  const Value& value(std::string_view trigger);
  [[nodiscard]] const SerializedPayload& payload(std::string_view trigger) const;
  /// Host monotonic time at which the message became visible to this
  /// federate (after any injected latency).
  [[nodiscard]] std::int64_t arrival_time(std::string_view trigger) const;

  /// Sends on every connection leaving the named output port.
  void publish(std::string_view port, const Value& value);
  void publish(std::string_view port, const SerializedPayload& payload);
  /// Schedules a logical action `delay` after the current tag; zero delay
  /// means the next microstep.
  void schedule(std::string_view action, Nanos delay, Value value = {});
  void request_stop();

  [[nodiscard]] Federate& federate() noexcept { return *fed_; }

 private:
  friend class Federate;
  ReactionContext(Federate* fed, Tag tag) : fed_(fed), tag_(tag) {}

  Event* find(std::string_view trigger) const;

  Federate* fed_;
  Tag tag_;
  std::map<TriggerId, Event*> present_;
};

using ReactionBody = std::function<void(ReactionContext&)>;
using LatenessHandler = std::function<void(ReactionContext&, Nanos lateness)>;

struct Reaction {
  std::string name;
  /// Input ports, timers, actions, or the reserved "startup" / "shutdown".
  std::vector<std::string> triggers;
  /// Reactions triggered at the same tag run in ascending order.
  int order = 0;
  ReactionBody body;
  std::optional<Nanos> deadline;
  /// Runs instead of `body` when the reaction starts more than `deadline`
  /// after its tag's timestamp.
  LatenessHandler on_deadline_miss;
  /// Receives an input that arrived after its tag had already been passed.
  LatenessHandler on_stp_violation;
};

struct FederateStats {
  std::uint64_t tags_executed = 0;
  std::uint64_t reactions_run = 0;
  std::uint64_t deadline_misses = 0;
  std::uint64_t stp_violations = 0;
  std::uint64_t stp_handled = 0;
  std::uint64_t stp_dropped = 0;
  std::uint64_t messages_received = 0;
  std::uint64_t messages_sent = 0;
  std::uint64_t store_publishes = 0;
  std::uint64_t inline_publishes = 0;
  std::uint64_t fragmented_publishes = 0;
  std::uint64_t net_reports = 0;
  std::uint64_t grants_received = 0;
  bool rti_lost = false;
};

struct TraceRecord {
  Tag tag;
  std::int64_t physical_start = 0;
  Tag grant = Tag::never();
};

/// A federate process's runtime: one executor thread runs every reaction in
/// tag order; receiver threads only decode frames and hand them over.
class Federate {
 public:
  Federate(FederateConfig config, Topology topology);
  ~Federate();
  Federate(const Federate&) = delete;
  Federate& operator=(const Federate&) = delete;

  /// Timer firing at start + offset, then every `period` (0 = once).
  void add_timer(std::string name, Nanos offset, Nanos period);
  void add_action(std::string name);
  /// Throws std::invalid_argument for a non-positive deadline or an unknown
  /// trigger.
  void add_reaction(Reaction reaction);

  /// Joins the federation, executes until the stop tag, then resigns.
  /// Throws Error(reaction_failed) if a reaction throws (after resigning).
  void run();
  /// Thread-safe request that the federation stop.
  void request_stop();

  [[nodiscard]] const FederateConfig& config() const noexcept;
  [[nodiscard]] const Topology& topology() const noexcept;
  [[nodiscard]] FederateStats stats() const;
  [[nodiscard]] const std::vector<TraceRecord>& trace() const noexcept;
  [[nodiscard]] Tag start_tag() const noexcept;
  [[nodiscard]] std::optional<Tag> stop_tag() const noexcept;
  [[nodiscard]] bool store_connected() const noexcept;

 private:
  friend class ReactionContext;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hprm

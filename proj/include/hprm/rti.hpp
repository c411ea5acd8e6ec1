#pragma once

#include "hprm/tag.hpp"
#include "hprm/topology.hpp"

#include <chrono>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace hprm {

enum class CoordinationMode : std::uint8_t { centralized = 0, decentralized = 1 };

std::string_view to_string(CoordinationMode m) noexcept;
/// Accepts "centralized" / "decentralized"; throws std::invalid_argument.
CoordinationMode parse_mode(std::string_view text);

enum class FederateState : std::uint8_t { absent, joined, running, resigned };
enum class FederationPhase : std::uint8_t { registering, running, stopping };

struct FederateRecord {
  std::string id;
  Tag tag_grant = Tag::never();  // TAG_f
  Tag ltc = Tag::never();        // LTC_f
  Tag net = Tag::never();        // NET_f
  FederateState state = FederateState::absent;
  std::int64_t clock_at_join = 0;
  /// Tags of messages forwarded to this federate that it has not yet
  /// reported complete.
  std::multiset<Tag> in_transit;
};

struct Grant {
  FederateIndex federate;
  Tag tag;

  bool operator==(const Grant&) const = default;
};

struct RtiOptions {
  CoordinationMode mode = CoordinationMode::centralized;
  Nanos startup_offset = std::chrono::milliseconds(100);
  /// When set, the federation stops at start tag + timeout.
  std::optional<Nanos> timeout;
};

/// The coordinator's state machine. It does no I/O: every handler returns the
/// grants to emit, so the daemon and the simulation tests drive the same
/// logic.
///
/// A grant G to federate f promises that no message tagged below G will ever
/// reach f, so f may process every tag strictly less than G. The bound for f
/// is the minimum, over its upstream connections u -> f with delay a, of
/// delay_tag(EFE_u, a), where EFE_u is the earliest tag at which u could
/// still produce an event: the minimum over u and its ancestors w of w's
/// pending work (NET_w and messages forwarded to w but not yet completed),
/// pushed along the path from w to u. A federate with no upstream is granted
/// forever.
class Rti {
 public:
  Rti(Topology topology, RtiOptions opts = {});

  /// Errors: unknown_federate, duplicate_registration, invalid_state (not
  /// registering).
  FederateIndex register_federate(std::string_view id, std::int64_t physical_clock);
  [[nodiscard]] bool all_registered() const noexcept;
  /// Moves to running and fixes the start tag: the latest clock reported at
  /// registration plus the startup offset. Returns the start tag.
  Tag start();

  /// Grant bound for `f`, or nullopt when it would not advance TAG_f.
  /// Errors: unknown_federate.
  [[nodiscard]] std::optional<Tag> compute_grant(FederateIndex f) const;

  /// Errors: protocol (regression below the federate's pending work).
  std::vector<Grant> handle_net(FederateIndex f, Tag tag);
  /// Errors: protocol (above TAG_f in centralized mode, or a regression).
  std::vector<Grant> handle_ltc(FederateIndex f, Tag tag);
  /// Records a message forwarded to `destination`. Returns false, and counts
  /// a safety violation, if the destination was already granted past `tag`.
  bool handle_forward(FederateIndex destination, Tag tag);
  std::vector<Grant> handle_resign(FederateIndex f);

  /// Fixes the stop tag one microstep past the furthest tag any federate has
  /// reported or been sent. Returns it the first time; nullopt when already
  /// stopping or when deferred because registration is still open.
  std::optional<Tag> initiate_shutdown(std::optional<Tag> proposal = std::nullopt);

  /// Grants every running federate could currently receive.
  std::vector<Grant> recompute_all();

  [[nodiscard]] const FederateRecord& record(FederateIndex f) const;
  [[nodiscard]] const Topology& topology() const noexcept { return topo_; }
  [[nodiscard]] FederationPhase phase() const noexcept { return phase_; }
  [[nodiscard]] Tag start_tag() const noexcept { return start_tag_; }
  [[nodiscard]] std::optional<Tag> stop_tag() const noexcept { return stop_tag_; }
  [[nodiscard]] bool all_resigned() const noexcept;
  [[nodiscard]] std::uint64_t safety_violations() const noexcept { return safety_violations_; }
  [[nodiscard]] const RtiOptions& options() const noexcept { return opts_; }
  [[nodiscard]] std::size_t size() const noexcept { return records_.size(); }

 private:
  struct Edge {
    FederateIndex from;
    FederateIndex to;
    Delay delay;
  };

  void check_index(FederateIndex f) const;
  [[nodiscard]] Tag pending(FederateIndex w) const;
  [[nodiscard]] std::vector<Tag> earliest_future_events() const;
  std::vector<Grant> issue(const std::vector<FederateIndex>& candidates);
  void pop_completed(FederateRecord& r);
  Tag compute_stop(std::optional<Tag> proposal) const;

  Topology topo_;
  RtiOptions opts_;
  std::vector<FederateRecord> records_;
  std::vector<Edge> edges_;
  FederationPhase phase_ = FederationPhase::registering;
  Tag start_tag_ = Tag::never();
  std::optional<Tag> stop_tag_;
  bool stop_deferred_ = false;
  std::optional<Tag> deferred_proposal_;
  std::uint64_t safety_violations_ = 0;
};

}  // namespace hprm

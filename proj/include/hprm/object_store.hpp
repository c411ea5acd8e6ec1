#pragma once

#include "hprm/serde.hpp"

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace hprm {

/// 20-byte opaque object identifier, random per producer.
struct ObjectId {
  static constexpr std::size_t kSize = 20;
  std::array<std::uint8_t, kSize> bytes{};

  static ObjectId random();
  static ObjectId from_hex(std::string_view hex);
  [[nodiscard]] std::string hex() const;

  auto operator<=>(const ObjectId&) const = default;
};

struct ObjectIdHash {
  std::size_t operator()(const ObjectId& id) const noexcept;
};

struct Extent {
  std::uint64_t offset = 0;
  std::uint64_t length = 0;

  bool operator==(const Extent&) const = default;
};

/// Handle that travels in OBJ_REF frames in place of the payload.
struct ObjectRef {
  ObjectId id;
  std::uint64_t total_length = 0;
  Extent inband;
  std::vector<Extent> segments;

  /// Segment regions must not overlap and must lie within [0, total_length).
  [[nodiscard]] bool valid() const noexcept;

  [[nodiscard]] std::vector<std::byte> encode() const;
  /// Throws Error(malformed) on a short or inconsistent body.
  static ObjectRef decode(std::span<const std::byte> body);

  bool operator==(const ObjectRef&) const = default;
};

inline constexpr std::size_t kSegmentAlignment = 64;

constexpr std::uint64_t align_up(std::uint64_t v, std::uint64_t a = kSegmentAlignment) noexcept {
  return (v + a - 1) / a * a;
}

// Object layout: the payload header (which embeds the in-band stream) at
// offset 0, then each segment at the next 64-byte boundary.
ObjectRef plan_layout(const SerializedPayload& payload, const ObjectId& id);
/// Writes every byte of the object exactly once. `out` must be
/// ref.total_length bytes.
void write_layout(const SerializedPayload& payload, const ObjectRef& ref, std::span<std::byte> out);
/// Views the object as a payload; segments alias `object`.
SerializedPayload view_layout(const ObjectRef& ref, const Buffer& object);

// ---------------------------------------------------------------------------
// Store metadata. Pure bookkeeping with no I/O; the daemon wraps it.

using ClientId = std::uint64_t;

enum class EntryState : std::uint8_t { creating, sealed };

struct StoreEntry {
  ObjectId id;
  EntryState state = EntryState::creating;
  std::uint64_t size = 0;
  std::uint64_t offset = 0;  // within the arena
  std::uint32_t ref_count = 0;
  std::uint64_t last_access = 0;
  ClientId creator = 0;
  std::uint32_t write_passes = 0;
};

struct StoreConfig {
  std::uint64_t capacity_bytes = std::uint64_t{1} << 30;
  double eviction_fraction = 0.2;
};

enum class StoreOp : std::uint8_t { create, seal, get, release, evict, abort };
std::string_view to_string(StoreOp op) noexcept;

struct StoreLogRecord {
  std::uint64_t seq = 0;
  StoreOp op = StoreOp::create;
  ObjectId id;
  std::uint64_t size = 0;
  ClientId client = 0;
};

struct StoreCounters {
  std::uint64_t creates = 0;
  std::uint64_t seals = 0;
  std::uint64_t gets = 0;
  std::uint64_t releases = 0;
  std::uint64_t evictions = 0;
  std::uint64_t evicted_bytes = 0;
  std::uint64_t eviction_passes = 0;
};

struct Placement {
  std::uint64_t offset = 0;
  std::uint64_t size = 0;
};

class StoreCore {
 public:
  explicit StoreCore(StoreConfig cfg);

  /// Errors: duplicate_id, precondition (size 0), capacity_exceeded,
  /// store_full. Evicts first when free space is short.
  Placement create(ClientId client, const ObjectId& id, std::uint64_t size);
  /// Errors: unknown_id, already_sealed, precondition (not the creator).
  void seal(ClientId client, const ObjectId& id, std::uint32_t write_passes = 1);
  /// Sealed objects are pinned and returned; nullopt while absent or unsealed.
  std::optional<Placement> try_get(ClientId client, const ObjectId& id);
  /// Error no_reference when `client` holds no reference to `id`.
  void release(ClientId client, const ObjectId& id);
  /// Bulk LRU eviction. Error store_full, with nothing evicted, when the
  /// evictable bytes cannot cover `bytes_needed`.
  std::vector<ObjectId> evict(std::uint64_t bytes_needed);
  /// Drops the client's references and aborts its unsealed creates.
  void disconnect(ClientId client);

  [[nodiscard]] std::uint64_t capacity() const noexcept { return cfg_.capacity_bytes; }
  [[nodiscard]] std::uint64_t arena_size() const noexcept { return arena_size_; }
  [[nodiscard]] std::uint64_t occupancy() const noexcept { return occupancy_; }
  [[nodiscard]] std::uint64_t free_bytes() const noexcept { return cfg_.capacity_bytes - occupancy_; }
  [[nodiscard]] std::size_t entry_count() const noexcept { return entries_.size(); }
  [[nodiscard]] std::optional<StoreEntry> entry(const ObjectId& id) const;
  [[nodiscard]] const std::vector<StoreLogRecord>& log() const noexcept { return log_; }
  [[nodiscard]] const StoreCounters& counters() const noexcept { return counters_; }
  [[nodiscard]] const StoreConfig& config() const noexcept { return cfg_; }

 private:
  std::optional<std::uint64_t> allocate(std::uint64_t size);
  void deallocate(std::uint64_t offset, std::uint64_t size);
  void remove(const ObjectId& id, StoreOp why, ClientId client);
  void record(StoreOp op, const ObjectId& id, std::uint64_t size, ClientId client);
  std::vector<ObjectId> lru_evictable() const;

  StoreConfig cfg_;
  std::uint64_t arena_size_;
  std::uint64_t occupancy_ = 0;
  std::uint64_t clock_ = 0;
  std::unordered_map<ObjectId, StoreEntry, ObjectIdHash> entries_;
  std::map<std::uint64_t, std::uint64_t> free_;  // offset -> length, coalesced
  std::unordered_map<ClientId, std::map<ObjectId, std::uint32_t>> pins_;
  std::vector<StoreLogRecord> log_;
  StoreCounters counters_;
};

}  // namespace hprm

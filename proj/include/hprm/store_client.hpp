#pragma once

#include "hprm/object_store.hpp"
#include "hprm/shm_arena.hpp"
#include "hprm/tag.hpp"
#include "hprm/transport.hpp"

#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hprm {

struct StoreStats {
  std::uint64_t capacity = 0;
  std::uint64_t occupancy = 0;
  std::uint64_t entries = 0;
  StoreCounters counters;
};

/// Client handle to a store daemon. Requests from several threads are
/// serialized; each one is an independent round trip.
class StoreClient : public std::enable_shared_from_this<StoreClient> {
 public:
  static std::shared_ptr<StoreClient> connect(const std::string& socket_path,
                                              Nanos timeout = std::chrono::seconds(2));

  /// Writable region of exactly `size` bytes.
  std::span<std::byte> create(const ObjectId& id, std::uint64_t size);
  void seal(const ObjectId& id, std::uint32_t write_passes = 1);
  /// Blocks up to `timeout` for the object to be sealed, then pins it.
  /// Error(timeout) if it never appears.
  std::span<const std::byte> get(const ObjectId& id, Nanos timeout);
  void release(const ObjectId& id);
  std::vector<ObjectId> evict(std::uint64_t bytes_needed);

  StoreStats stats();
  std::vector<StoreLogRecord> op_log(std::uint64_t from = 0);
  std::optional<StoreEntry> entry(const ObjectId& id);

  /// Creates, writes the payload once in its store layout, and seals.
  ObjectRef put(const SerializedPayload& payload, const ObjectId& id = ObjectId::random());
  /// Pins the object and views it as a payload. The pin is released when the
  /// last buffer aliasing the object is dropped.
  SerializedPayload fetch(const ObjectRef& ref, Nanos timeout);
  /// Pinned read-only view with the same release-on-drop behavior.
  Buffer get_buffer(const ObjectId& id, Nanos timeout);

  [[nodiscard]] ClientId id() const noexcept { return client_id_; }
  [[nodiscard]] std::uint64_t capacity() const noexcept { return capacity_; }

  StoreClient(const StoreClient&) = delete;
  StoreClient& operator=(const StoreClient&) = delete;

 private:
  StoreClient() = default;
  std::vector<std::byte> call(std::uint8_t op, std::span<const std::byte> body);

  std::mutex mu_;
  Socket sock_;
  ShmArena read_map_;
  ShmArena write_map_;
  ClientId client_id_ = 0;
  std::uint64_t capacity_ = 0;
};

}  // namespace hprm

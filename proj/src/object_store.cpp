#include "hprm/object_store.hpp"

#include "hprm/error.hpp"

#include <algorithm>
#include <cstring>
#include <random>

namespace hprm {

namespace {

template <typename T> void put_le(std::vector<std::byte>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::byte>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
  }
}

template <typename T> T get_le(std::span<const std::byte> in, std::size_t& pos) {
  if (in.size() - pos < sizeof(T) || pos > in.size()) throw Error(Errc::malformed, "object reference truncated");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(std::to_integer<std::uint8_t>(in[pos + i])) << (8 * i);
  }
  pos += sizeof(T);
  return static_cast<T>(v);
}

}  // namespace

ObjectId ObjectId::random() {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  ObjectId id;
  for (std::size_t i = 0; i < kSize; i += 8) {
    auto word = rng();
    for (std::size_t j = 0; j < 8 && i + j < kSize; ++j) id.bytes[i + j] = static_cast<std::uint8_t>(word >> (8 * j));
  }
  return id;
}

ObjectId ObjectId::from_hex(std::string_view hex) {
  if (hex.size() != 2 * kSize) throw std::invalid_argument("object id must be 40 hex digits");
  auto nibble = [](char c) -> std::uint8_t {
    if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
    throw std::invalid_argument("bad hex digit in object id");
  };
  ObjectId id;
  for (std::size_t i = 0; i < kSize; ++i) {
    id.bytes[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
  }
  return id;
}

std::string ObjectId::hex() const {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * kSize);
  for (auto b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xF]);
  }
  return out;
}

std::size_t ObjectIdHash::operator()(const ObjectId& id) const noexcept {
  std::uint64_t h;
  std::memcpy(&h, id.bytes.data(), sizeof h);
  return static_cast<std::size_t>(h);
}

bool ObjectRef::valid() const noexcept {
  std::vector<Extent> all = segments;
  if (inband.length > 0) all.push_back(inband);
  for (const auto& e : all) {
    if (e.offset > total_length || e.length > total_length - e.offset) return false;
  }
  std::sort(all.begin(), all.end(), [](const Extent& a, const Extent& b) { return a.offset < b.offset; });
  for (std::size_t i = 1; i < all.size(); ++i) {
    if (all[i - 1].offset + all[i - 1].length > all[i].offset) return false;
  }
  return true;
}

// id | total u64 | inband offset u64 | inband length u64 | count u16 | (offset u64, length u64)*
std::vector<std::byte> ObjectRef::encode() const {
  std::vector<std::byte> out;
  out.reserve(ObjectId::kSize + 26 + 16 * segments.size());
  for (auto b : id.bytes) out.push_back(static_cast<std::byte>(b));
  put_le<std::uint64_t>(out, total_length);
  put_le<std::uint64_t>(out, inband.offset);
  put_le<std::uint64_t>(out, inband.length);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(segments.size()));
  for (const auto& s : segments) {
    put_le<std::uint64_t>(out, s.offset);
    put_le<std::uint64_t>(out, s.length);
  }
  return out;
}

ObjectRef ObjectRef::decode(std::span<const std::byte> body) {
  if (body.size() < ObjectId::kSize) throw Error(Errc::malformed, "object reference truncated");
  ObjectRef ref;
  for (std::size_t i = 0; i < ObjectId::kSize; ++i) ref.id.bytes[i] = std::to_integer<std::uint8_t>(body[i]);
  std::size_t pos = ObjectId::kSize;
  ref.total_length = get_le<std::uint64_t>(body, pos);
  ref.inband.offset = get_le<std::uint64_t>(body, pos);
  ref.inband.length = get_le<std::uint64_t>(body, pos);
  auto n = get_le<std::uint16_t>(body, pos);
  ref.segments.reserve(n);
  for (std::uint16_t i = 0; i < n; ++i) {
    Extent e;
    e.offset = get_le<std::uint64_t>(body, pos);
    e.length = get_le<std::uint64_t>(body, pos);
    ref.segments.push_back(e);
  }
  if (pos != body.size()) throw Error(Errc::malformed, "trailing bytes after object reference");
  if (!ref.valid()) throw Error(Errc::malformed, "object reference extents overlap or exceed the object");
  return ref;
}

ObjectRef plan_layout(const SerializedPayload& payload, const ObjectId& id) {
  ObjectRef ref;
  ref.id = id;
  ref.inband = Extent{5, payload.inband.size()};
  std::uint64_t cursor = payload.header_size();
  for (const auto& seg : payload.segments) {
    cursor = align_up(cursor);
    ref.segments.push_back(Extent{cursor, seg.size()});
    cursor += seg.size();
  }
  ref.total_length = cursor;
  return ref;
}

void write_layout(const SerializedPayload& payload, const ObjectRef& ref, std::span<std::byte> out) {
  if (out.size() != ref.total_length || ref.segments.size() != payload.segments.size()) {
    throw Error(Errc::precondition, "object region does not match the planned layout");
  }
  const auto header = payload.header_size();
  write_payload_header(payload, out.first(header));
  std::uint64_t cursor = header;
  for (std::size_t i = 0; i < payload.segments.size(); ++i) {
    const auto& ext = ref.segments[i];
    // Alignment padding is zeroed so every byte of the object is written once.
    std::memset(out.data() + cursor, 0, ext.offset - cursor);
    std::memcpy(out.data() + ext.offset, payload.segments[i].data(), ext.length);
    cursor = ext.offset + ext.length;
  }
}

SerializedPayload view_layout(const ObjectRef& ref, const Buffer& object) {
  if (object.size() < ref.total_length) throw Error(Errc::truncated, "object shorter than its reference");
  auto header = parse_payload_header(object.bytes().first(ref.total_length));
  if (header.segment_lengths.size() != ref.segments.size()) {
    throw Error(Errc::segment_mismatch, "object segment count disagrees with its reference");
  }
  SerializedPayload p;
  p.version = header.version;
  p.inband = object.slice(ref.inband.offset, ref.inband.length);
  p.segments.reserve(ref.segments.size());
  for (std::size_t i = 0; i < ref.segments.size(); ++i) {
    if (header.segment_lengths[i] != ref.segments[i].length) {
      throw Error(Errc::segment_mismatch, "object segment length disagrees with its reference");
    }
    p.segments.push_back(object.slice(ref.segments[i].offset, ref.segments[i].length));
  }
  return p;
}

// ---------------------------------------------------------------------------

std::string_view to_string(StoreOp op) noexcept {
  switch (op) {
    case StoreOp::create: return "create";
    case StoreOp::seal: return "seal";
    case StoreOp::get: return "get";
    case StoreOp::release: return "release";
    case StoreOp::evict: return "evict";
    case StoreOp::abort: return "abort";
  }
  return "?";
}

StoreCore::StoreCore(StoreConfig cfg) : cfg_(cfg), arena_size_(align_up(cfg.capacity_bytes, 4096)) {
  if (cfg_.capacity_bytes == 0) throw std::invalid_argument("store capacity must be positive");
  if (!(cfg_.eviction_fraction >= 0.0 && cfg_.eviction_fraction <= 1.0)) {
    throw std::invalid_argument("eviction fraction must be within [0, 1]");
  }
  free_.emplace(0, arena_size_);
}

void StoreCore::record(StoreOp op, const ObjectId& id, std::uint64_t size, ClientId client) {
  log_.push_back(StoreLogRecord{log_.size(), op, id, size, client});
}

std::optional<std::uint64_t> StoreCore::allocate(std::uint64_t size) {
  const auto need = align_up(size);
  for (auto it = free_.begin(); it != free_.end(); ++it) {
    if (it->second < need) continue;
    const auto offset = it->first;
    const auto rest = it->second - need;
    free_.erase(it);
    if (rest > 0) free_.emplace(offset + need, rest);
    return offset;
  }
  return std::nullopt;
}

void StoreCore::deallocate(std::uint64_t offset, std::uint64_t size) {
  auto len = align_up(size);
  auto next = free_.lower_bound(offset);
  if (next != free_.end() && offset + len == next->first) {
    len += next->second;
    next = free_.erase(next);
  }
  if (next != free_.begin()) {
    auto prev = std::prev(next);
    if (prev->first + prev->second == offset) {
      prev->second += len;
      return;
    }
  }
  free_.emplace(offset, len);
}

std::vector<ObjectId> StoreCore::lru_evictable() const {
  std::vector<const StoreEntry*> cands;
  for (const auto& [id, e] : entries_) {
    if (e.state == EntryState::sealed && e.ref_count == 0) cands.push_back(&e);
  }
  std::sort(cands.begin(), cands.end(),
            [](const StoreEntry* a, const StoreEntry* b) { return a->last_access < b->last_access; });
  std::vector<ObjectId> ids;
  ids.reserve(cands.size());
  for (auto* e : cands) ids.push_back(e->id);
  return ids;
}

void StoreCore::remove(const ObjectId& id, StoreOp why, ClientId client) {
  auto it = entries_.find(id);
  deallocate(it->second.offset, it->second.size);
  occupancy_ -= it->second.size;
  record(why, id, it->second.size, client);
  entries_.erase(it);
}

Placement StoreCore::create(ClientId client, const ObjectId& id, std::uint64_t size) {
  if (size == 0) throw Error(Errc::precondition, "object size must be positive");
  if (entries_.count(id)) throw Error(Errc::duplicate_id, "object " + id.hex() + " already exists");
  if (size > cfg_.capacity_bytes) {
    throw Error(Errc::capacity_exceeded,
                "object of " + std::to_string(size) + " bytes exceeds store capacity " + std::to_string(cfg_.capacity_bytes));
  }
  if (free_bytes() < size) evict(size - free_bytes());
  auto offset = allocate(size);
  if (!offset) {
    // Enough bytes are free but not contiguously; keep evicting in LRU order.
    for (const auto& victim : lru_evictable()) {
      const auto bytes = entries_.at(victim).size;
      remove(victim, StoreOp::evict, 0);
      ++counters_.evictions;
      counters_.evicted_bytes += bytes;
      if ((offset = allocate(size))) break;
    }
    if (!offset) throw Error(Errc::store_full, "no contiguous region of " + std::to_string(size) + " bytes");
  }
  StoreEntry e;
  e.id = id;
  e.size = size;
  e.offset = *offset;
  e.creator = client;
  e.last_access = ++clock_;
  entries_.emplace(id, e);
  occupancy_ += size;
  ++counters_.creates;
  record(StoreOp::create, id, size, client);
  return Placement{*offset, size};
}

void StoreCore::seal(ClientId client, const ObjectId& id, std::uint32_t write_passes) {
  auto it = entries_.find(id);
  if (it == entries_.end()) throw Error(Errc::unknown_id, "seal of unknown object " + id.hex());
  auto& e = it->second;
  if (e.state == EntryState::sealed) throw Error(Errc::already_sealed, "object " + id.hex() + " is already sealed");
  if (e.creator != client) throw Error(Errc::precondition, "only the creator may seal object " + id.hex());
  e.state = EntryState::sealed;
  e.write_passes = write_passes;
  e.last_access = ++clock_;
  ++counters_.seals;
  record(StoreOp::seal, id, e.size, client);
}

std::optional<Placement> StoreCore::try_get(ClientId client, const ObjectId& id) {
  auto it = entries_.find(id);
  if (it == entries_.end() || it->second.state != EntryState::sealed) return std::nullopt;
  auto& e = it->second;
  ++e.ref_count;
  e.last_access = ++clock_;
  ++pins_[client][id];
  ++counters_.gets;
  record(StoreOp::get, id, e.size, client);
  return Placement{e.offset, e.size};
}

void StoreCore::release(ClientId client, const ObjectId& id) {
  auto cit = pins_.find(client);
  if (cit == pins_.end()) throw Error(Errc::no_reference, "no reference held on " + id.hex());
  auto pit = cit->second.find(id);
  if (pit == cit->second.end()) throw Error(Errc::no_reference, "no reference held on " + id.hex());
  if (--pit->second == 0) cit->second.erase(pit);
  auto& e = entries_.at(id);
  --e.ref_count;
  ++counters_.releases;
  record(StoreOp::release, id, e.size, client);
}

std::vector<ObjectId> StoreCore::evict(std::uint64_t bytes_needed) {
  auto order = lru_evictable();
  std::uint64_t evictable = 0;
  for (const auto& id : order) evictable += entries_.at(id).size;
  if (evictable < bytes_needed) {
    throw Error(Errc::store_full, "need " + std::to_string(bytes_needed) + " bytes but only " +
                                      std::to_string(evictable) + " are evictable");
  }
  const auto floor = static_cast<std::uint64_t>(cfg_.eviction_fraction * static_cast<double>(cfg_.capacity_bytes));
  const auto target = std::max(bytes_needed, floor);
  std::vector<ObjectId> evicted;
  std::uint64_t freed = 0;
  for (const auto& id : order) {
    if (freed >= target) break;
    freed += entries_.at(id).size;
    remove(id, StoreOp::evict, 0);
    evicted.push_back(id);
  }
  ++counters_.eviction_passes;
  counters_.evictions += evicted.size();
  counters_.evicted_bytes += freed;
  return evicted;
}

void StoreCore::disconnect(ClientId client) {
  if (auto cit = pins_.find(client); cit != pins_.end()) {
    for (const auto& [id, n] : cit->second) {
      auto& e = entries_.at(id);
      e.ref_count -= n;
      for (std::uint32_t i = 0; i < n; ++i) {
        ++counters_.releases;
        record(StoreOp::release, id, e.size, client);
      }
    }
    pins_.erase(cit);
  }
  std::vector<ObjectId> orphans;
  for (const auto& [id, e] : entries_) {
    if (e.creator == client && e.state == EntryState::creating) orphans.push_back(id);
  }
  for (const auto& id : orphans) remove(id, StoreOp::abort, client);
}

std::optional<StoreEntry> StoreCore::entry(const ObjectId& id) const {
  auto it = entries_.find(id);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

}  // namespace hprm

#include "hprm/store_client.hpp"

#include "hprm/error.hpp"
#include "hprm/store_protocol.hpp"
#include "wire.hpp"

namespace hprm {

using store_wire::Op;

namespace {

ObjectId read_id(wire::Reader& r) {
  ObjectId id;
  r.raw_into(id.bytes);
  return id;
}

Placement read_placement(std::span<const std::byte> body) {
  wire::Reader r(body);
  Placement p;
  p.offset = r.get<std::uint64_t>();
  p.size = r.get<std::uint64_t>();
  return p;
}

}  // namespace

std::shared_ptr<StoreClient> StoreClient::connect(const std::string& socket_path, Nanos timeout) {
  std::shared_ptr<StoreClient> c(new StoreClient());
  c->sock_ = connect_unix(socket_path, timeout);
  auto body = c->call(static_cast<std::uint8_t>(Op::hello), {});
  wire::Reader r(body);
  c->client_id_ = r.get<std::uint64_t>();
  const auto arena_size = r.get<std::uint64_t>();
  c->capacity_ = r.get<std::uint64_t>();
  const bool prefaulted = r.get<std::uint8_t>() != 0;
  const auto name = r.str();
  // Page tables are built up front only when the daemon has already
  // committed the pages; otherwise mapping would commit the whole arena.
  c->read_map_ = ShmArena::open(name, arena_size, false, prefaulted);
  c->write_map_ = ShmArena::open(name, arena_size, true, prefaulted);
  return c;
}

std::vector<std::byte> StoreClient::call(std::uint8_t op, std::span<const std::byte> body) {
  wire::Writer w;
  w.put<std::uint8_t>(op).put<std::uint32_t>(static_cast<std::uint32_t>(body.size())).raw(body);
  std::lock_guard lock(mu_);
  write_all(sock_.fd(), w.bytes());
  std::array<std::byte, store_wire::kMessageHeader> hdr;
  read_exact(sock_.fd(), hdr);
  wire::Reader hr(hdr);
  const auto status = hr.get<std::uint8_t>();
  const auto len = hr.get<std::uint32_t>();
  if (len > store_wire::kMaxMessage) throw Error(Errc::protocol, "oversized store response");
  std::vector<std::byte> resp(len);
  read_exact(sock_.fd(), resp);
  if (status != 0) {
    throw Error(static_cast<Errc>(status - 1), std::string(reinterpret_cast<const char*>(resp.data()), resp.size()));
  }
  return resp;
}

std::span<std::byte> StoreClient::create(const ObjectId& id, std::uint64_t size) {
  wire::Writer w;
  w.raw(id.bytes).put<std::uint64_t>(size);
  auto p = read_placement(call(static_cast<std::uint8_t>(Op::create), w.bytes()));
  return write_map_.bytes().subspan(p.offset, p.size);
}

void StoreClient::seal(const ObjectId& id, std::uint32_t write_passes) {
  wire::Writer w;
  w.raw(id.bytes).put<std::uint32_t>(write_passes);
  call(static_cast<std::uint8_t>(Op::seal), w.bytes());
}

std::span<const std::byte> StoreClient::get(const ObjectId& id, Nanos timeout) {
  wire::Writer w;
  w.raw(id.bytes).put<std::int64_t>(timeout.count());
  auto p = read_placement(call(static_cast<std::uint8_t>(Op::get), w.bytes()));
  return read_map_.bytes().subspan(p.offset, p.size);
}

void StoreClient::release(const ObjectId& id) {
  wire::Writer w;
  w.raw(id.bytes);
  call(static_cast<std::uint8_t>(Op::release), w.bytes());
}

std::vector<ObjectId> StoreClient::evict(std::uint64_t bytes_needed) {
  wire::Writer w;
  w.put<std::uint64_t>(bytes_needed);
  auto body = call(static_cast<std::uint8_t>(Op::evict), w.bytes());
  wire::Reader r(body);
  std::vector<ObjectId> ids(r.get<std::uint32_t>());
  for (auto& id : ids) id = read_id(r);
  return ids;
}

StoreStats StoreClient::stats() {
  auto body = call(static_cast<std::uint8_t>(Op::stats), {});
  wire::Reader r(body);
  StoreStats s;
  s.capacity = r.get<std::uint64_t>();
  s.occupancy = r.get<std::uint64_t>();
  s.entries = r.get<std::uint64_t>();
  s.counters.creates = r.get<std::uint64_t>();
  s.counters.seals = r.get<std::uint64_t>();
  s.counters.gets = r.get<std::uint64_t>();
  s.counters.releases = r.get<std::uint64_t>();
  s.counters.evictions = r.get<std::uint64_t>();
  s.counters.evicted_bytes = r.get<std::uint64_t>();
  s.counters.eviction_passes = r.get<std::uint64_t>();
  return s;
}

std::vector<StoreLogRecord> StoreClient::op_log(std::uint64_t from) {
  wire::Writer w;
  w.put<std::uint64_t>(from);
  auto body = call(static_cast<std::uint8_t>(Op::op_log), w.bytes());
  wire::Reader r(body);
  std::vector<StoreLogRecord> out(r.get<std::uint32_t>());
  for (auto& rec : out) {
    rec.seq = r.get<std::uint64_t>();
    rec.op = static_cast<StoreOp>(r.get<std::uint8_t>());
    rec.id = read_id(r);
    rec.size = r.get<std::uint64_t>();
    rec.client = r.get<std::uint64_t>();
  }
  return out;
}

std::optional<StoreEntry> StoreClient::entry(const ObjectId& id) {
  wire::Writer w;
  w.raw(id.bytes);
  auto body = call(static_cast<std::uint8_t>(Op::entry), w.bytes());
  wire::Reader r(body);
  if (r.get<std::uint8_t>() == 0) return std::nullopt;
  StoreEntry e;
  e.id = id;
  e.state = static_cast<EntryState>(r.get<std::uint8_t>());
  e.size = r.get<std::uint64_t>();
  e.ref_count = r.get<std::uint32_t>();
  e.last_access = r.get<std::uint64_t>();
  e.write_passes = r.get<std::uint32_t>();
  return e;
}

ObjectRef StoreClient::put(const SerializedPayload& payload, const ObjectId& id) {
  auto ref = plan_layout(payload, id);
  auto region = create(id, ref.total_length);
  write_layout(payload, ref, region);
  seal(id, 1);
  return ref;
}

Buffer StoreClient::get_buffer(const ObjectId& id, Nanos timeout) {
  auto bytes = get(id, timeout);
  std::weak_ptr<StoreClient> weak = weak_from_this();
  // The owner's deleter drops the pin once no buffer aliases the mapping.
  std::shared_ptr<const void> pin(bytes.data(), [weak, id](const void*) {
    if (auto self = weak.lock()) {
      try {
        self->release(id);
      } catch (const Error&) {
        // The daemon already dropped our references.
      }
    }
  });
  return Buffer(std::move(pin), bytes);
}

SerializedPayload StoreClient::fetch(const ObjectRef& ref, Nanos timeout) {
  return view_layout(ref, get_buffer(ref.id, timeout));
}

}  // namespace hprm

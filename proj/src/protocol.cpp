#include "hprm/protocol.hpp"

#include "wire.hpp"

namespace hprm::protocol {

std::vector<std::byte> encode(const JoinRequest& j) {
  wire::Writer w;
  w.str(j.federate).put<std::int64_t>(j.physical_clock).str(j.listen_address);
  return w.take();
}

JoinRequest decode_join(std::span<const std::byte> body) {
  wire::Reader r(body);
  JoinRequest j;
  j.federate = r.str();
  j.physical_clock = r.get<std::int64_t>();
  j.listen_address = r.str();
  r.expect_end();
  return j;
}

// mode u8 | has stop u8 | stop time i64 | stop microstep u32 | count u16 | address*
std::vector<std::byte> encode(const StartInfo& s) {
  wire::Writer w;
  w.put<std::uint8_t>(static_cast<std::uint8_t>(s.mode)).put<std::uint8_t>(s.stop_tag ? 1 : 0);
  const Tag stop = s.stop_tag.value_or(Tag::forever());
  w.put<std::int64_t>(stop.time()).put<std::uint32_t>(stop.microstep());
  w.put<std::uint16_t>(static_cast<std::uint16_t>(s.peer_addresses.size()));
  for (const auto& a : s.peer_addresses) w.str(a);
  return w.take();
}

StartInfo decode_start(std::span<const std::byte> body) {
  wire::Reader r(body);
  StartInfo s;
  auto mode = r.get<std::uint8_t>();
  if (mode > 1) throw Error(Errc::malformed, "unknown coordination mode in START");
  s.mode = static_cast<CoordinationMode>(mode);
  const bool has_stop = r.get<std::uint8_t>() != 0;
  auto t = r.get<std::int64_t>();
  auto m = r.get<std::uint32_t>();
  if (has_stop) s.stop_tag = Tag{t, m};
  s.peer_addresses.resize(r.get<std::uint16_t>());
  for (auto& a : s.peer_addresses) a = r.str();
  r.expect_end();
  return s;
}

}  // namespace hprm::protocol

#pragma once

// Bodies of the control frames exchanged between federates and the RTI.
// The frame header already carries type, flags, tag and port; these are the
// payloads that need more than that.

#include "hprm/rti.hpp"
#include "hprm/tag.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hprm::protocol {

/// JOIN (federate -> RTI). The frame's decentralized flag states the mode the
/// federate was configured with.
struct JoinRequest {
  std::string federate;
  std::int64_t physical_clock = 0;
  /// host:port where the federate accepts peer connections; empty when it
  /// does not listen.
  std::string listen_address;
};

std::vector<std::byte> encode(const JoinRequest& j);
JoinRequest decode_join(std::span<const std::byte> body);

/// START (RTI -> federate). The frame tag is the start tag.
struct StartInfo {
  CoordinationMode mode = CoordinationMode::centralized;
  std::optional<Tag> stop_tag;
  /// Listen address of every federate, by topology index.
  std::vector<std::string> peer_addresses;
};

std::vector<std::byte> encode(const StartInfo& s);
StartInfo decode_start(std::span<const std::byte> body);

/// Payload of a peer hello: the JOIN frame a federate sends first on every
/// peer connection, with the frame port set to its topology index.
inline constexpr std::uint8_t kFlagPeerHello = 0x08;

}  // namespace hprm::protocol

#pragma once

#include "hprm/tag.hpp"

#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hprm {

enum class FrameType : std::uint8_t {
  join = 1,
  start = 2,
  net = 3,
  ltc = 4,
  tag_grant = 5,
  stop = 6,
  resign = 7,
  tagged_msg = 8,
  obj_ref = 9,
  ping = 10,
};

std::string_view to_string(FrameType t) noexcept;

/// Frame header layout (little-endian, 22 bytes):
///   type u8 | flags u8 | tag time i64 | tag microstep u32 | port u32 | body length u32
inline constexpr std::size_t kFrameHeaderSize = 22;
inline constexpr std::uint32_t kMaxBodyLength = 1u << 31;
inline constexpr std::size_t kDefaultEagerBufferBytes = 65536;

/// Flag bits.
inline constexpr std::uint8_t kFlagMoreFragments = 0x01;  // TAGGED_MSG continues in the next frame
inline constexpr std::uint8_t kFlagAccepted = 0x01;       // JOIN reply
inline constexpr std::uint8_t kFlagRejected = 0x02;       // JOIN reply
inline constexpr std::uint8_t kFlagDecentralized = 0x04;  // JOIN request

struct FrameHeader {
  FrameType type = FrameType::ping;
  std::uint8_t flags = 0;
  Tag tag;
  std::uint32_t port = 0;
  std::uint32_t body_length = 0;

  bool operator==(const FrameHeader&) const = default;
};

struct Frame {
  FrameType type = FrameType::ping;
  std::uint8_t flags = 0;
  Tag tag;
  std::uint32_t port = 0;
  std::vector<std::byte> body;

  bool operator==(const Frame&) const = default;
};

/// A received frame whose body lives in the connection's receive buffer; it
/// stays valid until the next receive on the same connection.
struct FrameView {
  FrameHeader header;
  std::span<const std::byte> body;

  [[nodiscard]] Frame to_frame() const;
};

void encode_header(const FrameHeader& h, std::span<std::byte, kFrameHeaderSize> out) noexcept;
/// Throws Error(protocol) for an unknown type byte or a body longer than 2^31.
FrameHeader decode_header(std::span<const std::byte, kFrameHeaderSize> in);

std::vector<std::byte> encode_frame(const Frame& f);
/// Throws Error(protocol | truncated).
Frame decode_frame(std::span<const std::byte> bytes);

struct ConnectionOptions {
  std::size_t eager_buffer_bytes = kDefaultEagerBufferBytes;
  bool disable_coalescing = true;
  std::chrono::milliseconds connect_timeout{2000};
  /// SO_PRIORITY passthrough; no latency claims are attached to it.
  std::optional<int> socket_priority;
};

/// Owned file descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) noexcept : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket();

  [[nodiscard]] int fd() const noexcept { return fd_; }
  [[nodiscard]] bool valid() const noexcept { return fd_ >= 0; }
  /// Wakes any thread blocked on the descriptor without releasing it.
  void shutdown() noexcept;

 private:
  int fd_ = -1;
};

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;

  /// Parses "host:port"; throws std::invalid_argument.
  static Endpoint parse(std::string_view text);
  [[nodiscard]] std::string to_string() const;
};

/// Stream connection with an eager receive buffer allocated once at setup.
/// One sender and one receiver may use it concurrently.
class Connection {
 public:
  Connection(Socket socket, ConnectionOptions opts);
  Connection(Connection&&) noexcept = default;
  Connection& operator=(Connection&&) noexcept = default;

  /// Writes header then body immediately; no rendezvous. Frames larger than
  /// the eager buffer are rejected with Error(oversize); Error(closed) when the
  /// peer is gone.
  void send_frame(const FrameHeader& header, std::span<const std::byte> body);
  void send_frame(const Frame& f) { send_frame(header_of(f), f.body); }
  void send_frame(FrameType type, Tag tag, std::uint32_t port = 0, std::span<const std::byte> body = {},
                  std::uint8_t flags = 0);

  /// Blocks for the next complete frame. Error(closed) at end of stream,
  /// Error(protocol) on a malformed header.
  FrameView recv_frame();
  /// As recv_frame(), or nullopt after `timeout` without a complete frame.
  std::optional<FrameView> recv_frame_for(Nanos timeout);

  void shutdown() noexcept { socket_.shutdown(); }

  [[nodiscard]] const ConnectionOptions& options() const noexcept { return opts_; }
  [[nodiscard]] bool coalescing_disabled() const;
  [[nodiscard]] std::size_t receive_capacity() const noexcept { return recv_buf_.size(); }
  [[nodiscard]] int fd() const noexcept { return socket_.fd(); }

  static FrameHeader header_of(const Frame& f) noexcept;

 private:
  std::optional<FrameView> recv_impl(std::optional<std::int64_t> deadline);
  bool fill(std::size_t needed, std::optional<std::int64_t> deadline);

  Socket socket_;
  ConnectionOptions opts_;
  std::vector<std::byte> recv_buf_;
  std::size_t head_ = 0;
  std::size_t tail_ = 0;
  std::size_t consumed_ = 0;
};

/// Error(refused | timeout).
Connection connect(const Endpoint& peer, const ConnectionOptions& opts = {});

class Listener {
 public:
  /// Binds and listens; port 0 picks an ephemeral port.
  explicit Listener(const Endpoint& bind, ConnectionOptions opts = {});

  Connection accept();
  std::optional<Connection> accept_for(Nanos timeout);
  void shutdown() noexcept { socket_.shutdown(); }

  [[nodiscard]] Endpoint endpoint() const { return bound_; }

 private:
  Socket socket_;
  ConnectionOptions opts_;
  Endpoint bound_;
};

inline constexpr std::size_t kPingBodyBytes = 64;

/// Sends `count` PING frames one at a time and returns each round trip,
/// measured with the monotonic clock. Error(timeout) if an echo is late.
std::vector<Nanos> ping_rtt(Connection& conn, std::size_t count, Nanos timeout = std::chrono::seconds(5));

/// Echoes every PING back until the peer closes. Returns the number echoed.
std::size_t serve_echo(Connection& conn);

// Local-domain helpers for daemons on the same host.
Socket listen_unix(const std::string& path);
Socket connect_unix(const std::string& path, Nanos timeout = std::chrono::seconds(2));
/// Reads exactly `out.size()` bytes; Error(closed) on early end of stream.
void read_exact(int fd, std::span<std::byte> out);
void write_all(int fd, std::span<const std::byte> in);

}  // namespace hprm

#include "hprm/transport.hpp"

#include "hprm/clock.hpp"
#include "hprm/error.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <stdexcept>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

namespace hprm {

std::string_view to_string(FrameType t) noexcept {
  switch (t) {
    case FrameType::join: return "JOIN";
    case FrameType::start: return "START";
    case FrameType::net: return "NET";
    case FrameType::ltc: return "LTC";
    case FrameType::tag_grant: return "TAG_GRANT";
    case FrameType::stop: return "STOP";
    case FrameType::resign: return "RESIGN";
    case FrameType::tagged_msg: return "TAGGED_MSG";
    case FrameType::obj_ref: return "OBJ_REF";
    case FrameType::ping: return "PING";
  }
  return "?";
}

namespace {

template <typename T> void put_le(std::byte* p, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    p[i] = static_cast<std::byte>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF);
  }
}

template <typename T> T get_le(const std::byte* p) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(std::to_integer<std::uint8_t>(p[i])) << (8 * i);
  }
  return static_cast<T>(v);
}

[[noreturn]] void throw_errno(Errc code, const std::string& what) {
  throw Error(code, what + ": " + std::strerror(errno));
}

int poll_timeout_ms(std::optional<std::int64_t> deadline) {
  if (!deadline) return -1;
  auto left = *deadline - monotonic_now();
  if (left <= 0) return 0;
  return static_cast<int>((left + 999'999) / 1'000'000);
}

// Returns false on timeout.
bool wait_readable(int fd, std::optional<std::int64_t> deadline) {
  for (;;) {
    pollfd p{fd, POLLIN, 0};
    int rc = ::poll(&p, 1, poll_timeout_ms(deadline));
    if (rc > 0) return true;
    if (rc == 0) {
      if (!deadline || monotonic_now() >= *deadline) return false;
      continue;
    }
    if (errno != EINTR) throw_errno(Errc::io, "poll");
  }
}

void apply_options(int fd, const ConnectionOptions& opts) {
  int nodelay = opts.disable_coalescing ? 1 : 0;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &nodelay, sizeof nodelay);
  if (opts.socket_priority) {
    int prio = *opts.socket_priority;
    ::setsockopt(fd, SOL_SOCKET, SO_PRIORITY, &prio, sizeof prio);
  }
}

sockaddr_in resolve(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  const std::string host = ep.host.empty() ? "127.0.0.1" : ep.host;
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw Error(Errc::refused, "cannot resolve host '" + host + "'");
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return addr;
}

}  // namespace

// ---------------------------------------------------------------------------
// Codec

void encode_header(const FrameHeader& h, std::span<std::byte, kFrameHeaderSize> out) noexcept {
  std::byte* p = out.data();
  p[0] = static_cast<std::byte>(h.type);
  p[1] = static_cast<std::byte>(h.flags);
  put_le<std::int64_t>(p + 2, h.tag.time());
  put_le<std::uint32_t>(p + 10, h.tag.microstep());
  put_le<std::uint32_t>(p + 14, h.port);
  put_le<std::uint32_t>(p + 18, h.body_length);
}

FrameHeader decode_header(std::span<const std::byte, kFrameHeaderSize> in) {
  const auto raw_type = std::to_integer<std::uint8_t>(in[0]);
  if (raw_type < static_cast<std::uint8_t>(FrameType::join) || raw_type > static_cast<std::uint8_t>(FrameType::ping)) {
    throw Error(Errc::protocol, "bad frame type byte " + std::to_string(raw_type));
  }
  FrameHeader h;
  h.type = static_cast<FrameType>(raw_type);
  h.flags = std::to_integer<std::uint8_t>(in[1]);
  h.tag = Tag{get_le<std::int64_t>(in.data() + 2), get_le<std::uint32_t>(in.data() + 10)};
  h.port = get_le<std::uint32_t>(in.data() + 14);
  h.body_length = get_le<std::uint32_t>(in.data() + 18);
  if (h.body_length > kMaxBodyLength) {
    throw Error(Errc::protocol, "frame body length " + std::to_string(h.body_length) + " exceeds 2^31");
  }
  return h;
}

Frame FrameView::to_frame() const {
  return Frame{header.type, header.flags, header.tag, header.port, {body.begin(), body.end()}};
}

std::vector<std::byte> encode_frame(const Frame& f) {
  if (f.body.size() > kMaxBodyLength) throw Error(Errc::oversize, "frame body exceeds 2^31 bytes");
  std::vector<std::byte> out(kFrameHeaderSize + f.body.size());
  encode_header(Connection::header_of(f), std::span<std::byte, kFrameHeaderSize>(out.data(), kFrameHeaderSize));
  std::copy(f.body.begin(), f.body.end(), out.begin() + kFrameHeaderSize);
  return out;
}

Frame decode_frame(std::span<const std::byte> bytes) {
  if (bytes.size() < kFrameHeaderSize) throw Error(Errc::truncated, "frame shorter than header");
  auto h = decode_header(bytes.first<kFrameHeaderSize>());
  if (bytes.size() - kFrameHeaderSize != h.body_length) {
    throw Error(Errc::truncated, "frame body length disagrees with header");
  }
  auto body = bytes.subspan(kFrameHeaderSize);
  return Frame{h.type, h.flags, h.tag, h.port, {body.begin(), body.end()}};
}

// ---------------------------------------------------------------------------
// Socket / Endpoint

Socket& Socket::operator=(Socket&& o) noexcept {
  if (this != &o) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = std::exchange(o.fd_, -1);
  }
  return *this;
}

Socket::~Socket() {
  if (fd_ >= 0) ::close(fd_);
}

void Socket::shutdown() noexcept {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

Endpoint Endpoint::parse(std::string_view text) {
  auto colon = text.rfind(':');
  if (colon == std::string_view::npos) throw std::invalid_argument("address must be host:port");
  Endpoint ep;
  ep.host = std::string(text.substr(0, colon));
  const std::string port(text.substr(colon + 1));
  try {
    std::size_t used = 0;
    int p = std::stoi(port, &used);
    if (used != port.size() || p < 0 || p > 65535) throw std::invalid_argument("port");
    ep.port = static_cast<std::uint16_t>(p);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad port in address '" + std::string(text) + "'");
  }
  return ep;
}

std::string Endpoint::to_string() const { return host + ":" + std::to_string(port); }

// ---------------------------------------------------------------------------
// Connection

Connection::Connection(Socket socket, ConnectionOptions opts)
    : socket_(std::move(socket)), opts_(opts), recv_buf_(opts.eager_buffer_bytes) {
  if (opts_.eager_buffer_bytes < kFrameHeaderSize + 1024) {
    throw std::invalid_argument("eager buffer must hold the largest control frame");
  }
  apply_options(socket_.fd(), opts_);
}

FrameHeader Connection::header_of(const Frame& f) noexcept {
  return FrameHeader{f.type, f.flags, f.tag, f.port, static_cast<std::uint32_t>(f.body.size())};
}

void Connection::send_frame(FrameType type, Tag tag, std::uint32_t port, std::span<const std::byte> body,
                            std::uint8_t flags) {
  send_frame(FrameHeader{type, flags, tag, port, static_cast<std::uint32_t>(body.size())}, body);
}

void Connection::send_frame(const FrameHeader& header, std::span<const std::byte> body) {
  if (kFrameHeaderSize + body.size() > opts_.eager_buffer_bytes) {
    throw Error(Errc::oversize, "frame of " + std::to_string(kFrameHeaderSize + body.size()) +
                                    " bytes exceeds the " + std::to_string(opts_.eager_buffer_bytes) +
                                    "-byte eager buffer");
  }
  if (!socket_.valid()) throw Error(Errc::closed, "connection closed");
  std::array<std::byte, kFrameHeaderSize> hdr;
  FrameHeader h = header;
  h.body_length = static_cast<std::uint32_t>(body.size());
  encode_header(h, hdr);
  write_all(socket_.fd(), hdr);
  if (!body.empty()) write_all(socket_.fd(), body);
}

bool Connection::fill(std::size_t needed, std::optional<std::int64_t> deadline) {
  while (tail_ - head_ < needed) {
    if (recv_buf_.size() - head_ < needed) {
      std::memmove(recv_buf_.data(), recv_buf_.data() + head_, tail_ - head_);
      tail_ -= head_;
      head_ = 0;
    }
    if (deadline && !wait_readable(socket_.fd(), deadline)) return false;
    ssize_t n = ::recv(socket_.fd(), recv_buf_.data() + tail_, recv_buf_.size() - tail_, 0);
    if (n == 0) throw Error(Errc::closed, "peer closed the connection");
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == ECONNRESET || errno == EPIPE || errno == ENOTCONN || errno == EBADF) {
        throw Error(Errc::closed, std::string("connection lost: ") + std::strerror(errno));
      }
      throw_errno(Errc::io, "recv");
    }
    tail_ += static_cast<std::size_t>(n);
  }
  return true;
}

std::optional<FrameView> Connection::recv_impl(std::optional<std::int64_t> deadline) {
  head_ += consumed_;
  consumed_ = 0;
  if (head_ == tail_) head_ = tail_ = 0;

  if (!fill(kFrameHeaderSize, deadline)) return std::nullopt;
  auto header = decode_header(std::span<const std::byte, kFrameHeaderSize>(recv_buf_.data() + head_, kFrameHeaderSize));
  const std::size_t total = kFrameHeaderSize + header.body_length;
  if (total > recv_buf_.size()) {
    throw Error(Errc::protocol, "frame of " + std::to_string(total) + " bytes exceeds the eager buffer");
  }
  if (!fill(total, deadline)) return std::nullopt;
  consumed_ = total;
  return FrameView{header, std::span<const std::byte>(recv_buf_.data() + head_ + kFrameHeaderSize, header.body_length)};
}

FrameView Connection::recv_frame() { return *recv_impl(std::nullopt); }

std::optional<FrameView> Connection::recv_frame_for(Nanos timeout) {
  return recv_impl(monotonic_now() + timeout.count());
}

bool Connection::coalescing_disabled() const {
  int v = 0;
  socklen_t len = sizeof v;
  if (::getsockopt(socket_.fd(), IPPROTO_TCP, TCP_NODELAY, &v, &len) != 0) return opts_.disable_coalescing;
  return v != 0;
}

Connection connect(const Endpoint& peer, const ConnectionOptions& opts) {
  auto addr = resolve(peer);
  Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) throw_errno(Errc::io, "socket");
  const int flags = ::fcntl(s.fd(), F_GETFL, 0);
  ::fcntl(s.fd(), F_SETFL, flags | O_NONBLOCK);
  int rc = ::connect(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  if (rc != 0 && errno != EINPROGRESS) {
    if (errno == ECONNREFUSED) throw Error(Errc::refused, "connection to " + peer.to_string() + " refused");
    throw_errno(Errc::io, "connect " + peer.to_string());
  }
  if (rc != 0) {
    pollfd p{s.fd(), POLLOUT, 0};
    int prc;
    do {
      prc = ::poll(&p, 1, static_cast<int>(opts.connect_timeout.count()));
    } while (prc < 0 && errno == EINTR);
    if (prc == 0) throw Error(Errc::timeout, "connecting to " + peer.to_string() + " timed out");
    int err = 0;
    socklen_t len = sizeof err;
    ::getsockopt(s.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (err == ECONNREFUSED) throw Error(Errc::refused, "connection to " + peer.to_string() + " refused");
    if (err != 0) throw Error(Errc::io, "connect " + peer.to_string() + ": " + std::strerror(err));
  }
  ::fcntl(s.fd(), F_SETFL, flags & ~O_NONBLOCK);
  return Connection(std::move(s), opts);
}

// ---------------------------------------------------------------------------
// Listener

Listener::Listener(const Endpoint& bind, ConnectionOptions opts) : opts_(opts) {
  auto addr = resolve(bind);
  socket_ = Socket(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!socket_.valid()) throw_errno(Errc::io, "socket");
  int one = 1;
  ::setsockopt(socket_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(socket_.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    throw_errno(Errc::io, "bind " + bind.to_string());
  }
  if (::listen(socket_.fd(), 64) != 0) throw_errno(Errc::io, "listen");
  sockaddr_in actual{};
  socklen_t len = sizeof actual;
  ::getsockname(socket_.fd(), reinterpret_cast<sockaddr*>(&actual), &len);
  char buf[INET_ADDRSTRLEN] = {};
  ::inet_ntop(AF_INET, &actual.sin_addr, buf, sizeof buf);
  bound_ = Endpoint{buf, ntohs(actual.sin_port)};
}

Connection Listener::accept() {
  for (;;) {
    int fd = ::accept4(socket_.fd(), nullptr, nullptr, SOCK_CLOEXEC);
    if (fd >= 0) return Connection(Socket(fd), opts_);
    if (errno == EINTR || errno == ECONNABORTED) continue;
    if (errno == EINVAL || errno == EBADF) throw Error(Errc::closed, "listener shut down");
    throw_errno(Errc::io, "accept");
  }
}

std::optional<Connection> Listener::accept_for(Nanos timeout) {
  if (!wait_readable(socket_.fd(), monotonic_now() + timeout.count())) return std::nullopt;
  return accept();
}

// ---------------------------------------------------------------------------
// Ping

std::vector<Nanos> ping_rtt(Connection& conn, std::size_t count, Nanos timeout) {
  std::vector<Nanos> rtts;
  rtts.reserve(count);
  std::array<std::byte, kPingBodyBytes> body{};
  for (std::size_t seq = 0; seq < count; ++seq) {
    put_le<std::uint64_t>(body.data(), seq);
    const auto t0 = monotonic_now();
    put_le<std::int64_t>(body.data() + 8, t0);
    conn.send_frame(FrameType::ping, Tag{}, 0, body);
    const auto deadline = t0 + timeout.count();
    for (;;) {
      auto left = deadline - monotonic_now();
      auto f = conn.recv_frame_for(Nanos{std::max<std::int64_t>(left, 0)});
      if (!f) throw Error(Errc::timeout, "no echo for ping " + std::to_string(seq));
      if (f->header.type == FrameType::ping && f->body.size() >= 8 && get_le<std::uint64_t>(f->body.data()) == seq) {
        break;
      }
    }
    rtts.emplace_back(monotonic_now() - t0);
  }
  return rtts;
}

std::size_t serve_echo(Connection& conn) {
  std::size_t echoed = 0;
  try {
    for (;;) {
      auto f = conn.recv_frame();
      if (f.header.type != FrameType::ping) continue;
      conn.send_frame(f.header, f.body);
      ++echoed;
    }
  } catch (const Error& e) {
    if (e.code() != Errc::closed) throw;
  }
  return echoed;
}

// ---------------------------------------------------------------------------
// Local-domain sockets and raw I/O

Socket listen_unix(const std::string& path) {
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path.size() >= sizeof(addr.sun_path)) throw std::invalid_argument("socket path too long: " + path);
  std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
  Socket s(::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) throw_errno(Errc::io, "socket");
  ::unlink(path.c_str());
  if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) throw_errno(Errc::io, "bind " + path);
  if (::listen(s.fd(), 64) != 0) throw_errno(Errc::io, "listen " + path);
  return s;
}

Socket connect_unix(const std::string& path, Nanos timeout) {
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path.size() >= sizeof(addr.sun_path)) throw std::invalid_argument("socket path too long: " + path);
  std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
  const auto deadline = monotonic_now() + timeout.count();
  for (;;) {
    Socket s(::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!s.valid()) throw_errno(Errc::io, "socket");
    if (::connect(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0) return s;
    if (errno != ENOENT && errno != ECONNREFUSED) throw_errno(Errc::refused, "connect " + path);
    if (monotonic_now() >= deadline) throw Error(Errc::refused, "no daemon listening at " + path);
    ::usleep(2000);
  }
}

void read_exact(int fd, std::span<std::byte> out) {
  std::size_t got = 0;
  while (got < out.size()) {
    ssize_t n = ::recv(fd, out.data() + got, out.size() - got, 0);
    if (n == 0) throw Error(Errc::closed, "peer closed the connection");
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == ECONNRESET || errno == ENOTCONN || errno == EBADF) throw Error(Errc::closed, "connection lost");
      throw_errno(Errc::io, "recv");
    }
    got += static_cast<std::size_t>(n);
  }
}

void write_all(int fd, std::span<const std::byte> in) {
  std::size_t sent = 0;
  while (sent < in.size()) {
    ssize_t n = ::send(fd, in.data() + sent, in.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EPIPE || errno == ECONNRESET || errno == ENOTCONN || errno == EBADF) {
        throw Error(Errc::closed, "connection closed");
      }
      throw_errno(Errc::io, "send");
    }
    sent += static_cast<std::size_t>(n);
  }
}

}  // namespace hprm

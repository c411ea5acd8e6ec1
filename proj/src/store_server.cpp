#include "hprm/store_server.hpp"

#include "hprm/clock.hpp"
#include "hprm/error.hpp"
#include "hprm/log.hpp"
#include "hprm/shm_arena.hpp"
#include "hprm/store_protocol.hpp"
#include "hprm/transport.hpp"
#include "wire.hpp"

#include <cerrno>
#include <cstring>
#include <fcntl.h>
#include <list>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

namespace hprm {

using store_wire::Op;

namespace {

struct Client {
  ClientId id;
  Socket sock;
  std::vector<std::byte> inbuf;
};

struct Waiter {
  ClientId client;
  ObjectId id;
  std::int64_t deadline;
};

std::vector<std::byte> frame_response(std::uint8_t status, std::span<const std::byte> body) {
  wire::Writer w;
  w.put<std::uint8_t>(status).put<std::uint32_t>(static_cast<std::uint32_t>(body.size())).raw(body);
  return w.take();
}

std::vector<std::byte> ok(std::span<const std::byte> body = {}) { return frame_response(0, body); }

std::vector<std::byte> fail(Errc code, const std::string& message) {
  return frame_response(static_cast<std::uint8_t>(1 + static_cast<int>(code)), std::as_bytes(std::span(message)));
}

std::vector<std::byte> placement_body(const Placement& p) {
  wire::Writer w;
  w.put<std::uint64_t>(p.offset).put<std::uint64_t>(p.size);
  return w.take();
}

}  // namespace

struct StoreServer::Impl {
  StoreServerOptions opts;
  StoreCore core;
  ShmArena arena;
  Socket listener;
  int wake_pipe[2] = {-1, -1};
  std::atomic<bool> stopping{false};
  std::list<Client> clients;
  std::list<Waiter> waiters;
  ClientId next_client = 1;

  explicit Impl(StoreServerOptions o) : opts(std::move(o)), core(opts.store) {
    if (opts.shm_name.empty()) opts.shm_name = "/hprm-store-" + std::to_string(::getpid());
    arena = ShmArena::create(opts.shm_name, core.arena_size(), opts.prefault);
    listener = listen_unix(opts.socket_path);
    if (::pipe2(wake_pipe, O_CLOEXEC | O_NONBLOCK) != 0) throw Error(Errc::io, "pipe");
  }

  ~Impl() {
    for (int fd : wake_pipe) {
      if (fd >= 0) ::close(fd);
    }
    ::unlink(opts.socket_path.c_str());
  }

  void send(Client& c, const std::vector<std::byte>& msg) {
    try {
      write_all(c.sock.fd(), msg);
    } catch (const Error&) {
      // The client is gone; the read side notices and cleans up.
    }
  }

  Client* find(ClientId id) {
    for (auto& c : clients) {
      if (c.id == id) return &c;
    }
    return nullptr;
  }

  void drop(std::list<Client>::iterator it) {
    log::debug("store: client ", it->id, " disconnected");
    core.disconnect(it->id);
    waiters.remove_if([&](const Waiter& w) { return w.client == it->id; });
    clients.erase(it);
  }

  void wake_waiters(const ObjectId& id) {
    for (auto it = waiters.begin(); it != waiters.end();) {
      if (it->id != id) {
        ++it;
        continue;
      }
      if (auto p = core.try_get(it->client, id)) {
        if (auto* c = find(it->client)) send(*c, ok(placement_body(*p)));
      }
      it = waiters.erase(it);
    }
  }

  void expire_waiters() {
    const auto now = monotonic_now();
    for (auto it = waiters.begin(); it != waiters.end();) {
      if (it->deadline > now) {
        ++it;
        continue;
      }
      if (auto* c = find(it->client)) {
        send(*c, fail(Errc::timeout, "get of " + it->id.hex() + " timed out"));
      }
      it = waiters.erase(it);
    }
  }

  std::vector<std::byte> hello(Client& c) {
    wire::Writer w;
    w.put<std::uint64_t>(c.id)
        .put<std::uint64_t>(core.arena_size())
        .put<std::uint64_t>(core.capacity())
        .put<std::uint8_t>(opts.prefault ? 1 : 0)
        .str(opts.shm_name);
    return ok(w.bytes());
  }

  std::vector<std::byte> stats() {
    const auto& k = core.counters();
    wire::Writer w;
    w.put<std::uint64_t>(core.capacity())
        .put<std::uint64_t>(core.occupancy())
        .put<std::uint64_t>(core.entry_count())
        .put<std::uint64_t>(k.creates)
        .put<std::uint64_t>(k.seals)
        .put<std::uint64_t>(k.gets)
        .put<std::uint64_t>(k.releases)
        .put<std::uint64_t>(k.evictions)
        .put<std::uint64_t>(k.evicted_bytes)
        .put<std::uint64_t>(k.eviction_passes);
    return ok(w.bytes());
  }

  std::vector<std::byte> op_log(std::uint64_t from) {
    const auto& log = core.log();
    wire::Writer w;
    const auto start = std::min<std::uint64_t>(from, log.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(log.size() - start));
    for (auto i = start; i < log.size(); ++i) {
      const auto& r = log[i];
      w.put<std::uint64_t>(r.seq).put<std::uint8_t>(static_cast<std::uint8_t>(r.op)).raw(r.id.bytes);
      w.put<std::uint64_t>(r.size).put<std::uint64_t>(r.client);
    }
    return ok(w.bytes());
  }

  std::vector<std::byte> entry(const ObjectId& id) {
    wire::Writer w;
    auto e = core.entry(id);
    w.put<std::uint8_t>(e ? 1 : 0);
    if (e) {
      w.put<std::uint8_t>(static_cast<std::uint8_t>(e->state))
          .put<std::uint64_t>(e->size)
          .put<std::uint32_t>(e->ref_count)
          .put<std::uint64_t>(e->last_access)
          .put<std::uint32_t>(e->write_passes);
    }
    return ok(w.bytes());
  }

  /// Returns nullopt when the response is deferred (a waiting get).
  std::optional<std::vector<std::byte>> handle(Client& c, Op op, std::span<const std::byte> body) {
    wire::Reader r(body);
    auto read_id = [&] {
      ObjectId id;
      r.raw_into(id.bytes);
      return id;
    };
    switch (op) {
      case Op::hello:
        return hello(c);
      case Op::create: {
        auto id = read_id();
        auto size = r.get<std::uint64_t>();
        return ok(placement_body(core.create(c.id, id, size)));
      }
      case Op::seal: {
        auto id = read_id();
        core.seal(c.id, id, r.get<std::uint32_t>());
        wake_waiters(id);
        return ok();
      }
      case Op::get: {
        auto id = read_id();
        auto timeout = r.get<std::int64_t>();
        if (auto p = core.try_get(c.id, id)) return ok(placement_body(*p));
        if (timeout <= 0) return fail(Errc::timeout, "object " + id.hex() + " is not available");
        waiters.push_back(Waiter{c.id, id, monotonic_now() + timeout});
        return std::nullopt;
      }
      case Op::release:
        core.release(c.id, read_id());
        return ok();
      case Op::stats:
        return stats();
      case Op::op_log:
        return op_log(r.get<std::uint64_t>());
      case Op::entry:
        return entry(read_id());
      case Op::evict: {
        auto ids = core.evict(r.get<std::uint64_t>());
        wire::Writer w;
        w.put<std::uint32_t>(static_cast<std::uint32_t>(ids.size()));
        for (const auto& id : ids) w.raw(id.bytes);
        return ok(w.bytes());
      }
    }
    return fail(Errc::protocol, "unknown store operation " + std::to_string(static_cast<int>(op)));
  }

  /// Consumes complete requests from the client's buffer. Returns false when
  /// the client must be dropped.
  bool process(Client& c) {
    std::size_t pos = 0;
    while (c.inbuf.size() - pos >= store_wire::kMessageHeader) {
      wire::Reader hr(std::span(c.inbuf).subspan(pos, store_wire::kMessageHeader));
      auto op = static_cast<Op>(hr.get<std::uint8_t>());
      auto len = hr.get<std::uint32_t>();
      if (len > store_wire::kMaxMessage) return false;
      if (c.inbuf.size() - pos - store_wire::kMessageHeader < len) break;
      auto body = std::span<const std::byte>(c.inbuf).subspan(pos + store_wire::kMessageHeader, len);
      std::optional<std::vector<std::byte>> resp;
      try {
        resp = handle(c, op, body);
      } catch (const Error& e) {
        resp = fail(e.code(), e.what());
      }
      if (resp) send(c, *resp);
      pos += store_wire::kMessageHeader + len;
    }
    c.inbuf.erase(c.inbuf.begin(), c.inbuf.begin() + static_cast<std::ptrdiff_t>(pos));
    return true;
  }

  void accept_one() {
    int fd = ::accept4(listener.fd(), nullptr, nullptr, SOCK_CLOEXEC | SOCK_NONBLOCK);
    if (fd < 0) return;
    clients.push_back(Client{next_client++, Socket(fd), {}});
  }

  bool read_client(Client& c) {
    std::byte buf[4096];
    for (;;) {
      ssize_t n = ::recv(c.sock.fd(), buf, sizeof buf, 0);
      if (n > 0) {
        c.inbuf.insert(c.inbuf.end(), buf, buf + n);
        continue;
      }
      if (n == 0) return false;
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) return process(c);
      return false;
    }
  }

  int poll_timeout() const {
    if (waiters.empty()) return -1;
    auto earliest = waiters.front().deadline;
    for (const auto& w : waiters) earliest = std::min(earliest, w.deadline);
    auto left = earliest - monotonic_now();
    if (left <= 0) return 0;
    return static_cast<int>((left + 999'999) / 1'000'000);
  }

  void run() {
    std::vector<pollfd> fds;
    while (!stopping.load()) {
      fds.clear();
      fds.push_back({wake_pipe[0], POLLIN, 0});
      fds.push_back({listener.fd(), POLLIN, 0});
      for (const auto& c : clients) fds.push_back({c.sock.fd(), POLLIN, 0});
      int rc = ::poll(fds.data(), fds.size(), poll_timeout());
      if (rc < 0 && errno != EINTR) throw Error(Errc::io, std::string("poll: ") + std::strerror(errno));
      if (stopping.load()) break;
      if (rc > 0) {
        if (fds[1].revents & POLLIN) accept_one();
        auto it = clients.begin();
        for (std::size_t i = 2; i < fds.size() && it != clients.end(); ++i) {
          auto cur = it++;
          if (fds[i].revents == 0) continue;
          if (!read_client(*cur)) drop(cur);
        }
      }
      expire_waiters();
    }
    // Closing every client socket turns blocked requests into Error(closed).
    clients.clear();
  }
};

StoreServer::StoreServer(StoreServerOptions opts) : impl_(std::make_unique<Impl>(std::move(opts))) {}
StoreServer::~StoreServer() = default;

void StoreServer::run() { impl_->run(); }

void StoreServer::stop() noexcept {
  impl_->stopping.store(true);
  char b = 1;
  [[maybe_unused]] auto n = ::write(impl_->wake_pipe[1], &b, 1);
}

const std::string& StoreServer::socket_path() const noexcept { return impl_->opts.socket_path; }
const std::string& StoreServer::shm_name() const noexcept { return impl_->opts.shm_name; }

}  // namespace hprm

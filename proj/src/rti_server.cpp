#include "hprm/rti_server.hpp"

#include "hprm/clock.hpp"
#include "hprm/error.hpp"
#include "hprm/log.hpp"
#include "hprm/protocol.hpp"

#include <atomic>
#include <condition_variable>
#include <list>
#include <mutex>
#include <thread>

namespace hprm {

struct RtiServer::Impl {
  struct Peer {
    std::unique_ptr<Connection> conn;
    std::optional<FederateIndex> index;
    std::string listen_address;
    bool alive = true;
  };

  RtiServerOptions opts;
  Listener listener;
  mutable std::mutex mu;
  std::condition_variable done_cv;
  Rti rti;
  std::list<Peer> peers;
  std::vector<Peer*> by_index;
  std::vector<std::thread> handlers;
  std::atomic<bool> stopping{false};
  RtiSummary stats;

  explicit Impl(RtiServerOptions o)
      : opts(std::move(o)), listener(opts.listen, opts.transport), rti(opts.topology, opts.rti) {
    by_index.resize(rti.size(), nullptr);
  }

  bool finished() const { return stopping.load() || rti.all_resigned(); }

  // All send helpers run with `mu` held.
  void send_to(FederateIndex f, FrameType type, Tag tag, std::span<const std::byte> body = {},
               std::uint32_t port = 0, std::uint8_t flags = 0) {
    auto* p = by_index[f];
    if (p == nullptr || !p->alive) return;
    try {
      p->conn->send_frame(type, tag, port, body, flags);
    } catch (const Error& e) {
      log::warn("rti: lost federate '", rti.record(f).id, "': ", e.what());
      p->alive = false;
      p->conn->shutdown();
    }
  }

  void emit(const std::vector<Grant>& grants) {
    for (const auto& g : grants) {
      send_to(g.federate, FrameType::tag_grant, g.tag);
      ++stats.grants_sent;
    }
  }

  void broadcast_stop(Tag stop) {
    log::info("rti: stop tag ", stop);
    for (FederateIndex f = 0; f < rti.size(); ++f) {
      if (rti.record(f).state == FederateState::running) send_to(f, FrameType::stop, stop);
    }
  }

  void start_federation() {
    const auto start = rti.start();
    protocol::StartInfo info;
    info.mode = opts.rti.mode;
    info.stop_tag = rti.stop_tag();
    info.peer_addresses.resize(rti.size());
    for (FederateIndex f = 0; f < rti.size(); ++f) info.peer_addresses[f] = by_index[f]->listen_address;
    const auto body = protocol::encode(info);
    log::info("rti: all ", rti.size(), " federates joined; start tag ", start);
    for (FederateIndex f = 0; f < rti.size(); ++f) send_to(f, FrameType::start, start, body);
    emit(rti.recompute_all());
  }

  void resign(FederateIndex f) {
    if (rti.record(f).state == FederateState::resigned) return;
    emit(rti.handle_resign(f));
    if (rti.all_resigned()) done_cv.notify_all();
  }

  void on_join(Peer& peer, const FrameView& f) {
    const bool decentralized = (f.header.flags & kFlagDecentralized) != 0;
    auto reject = [&](const std::string& why) {
      log::warn("rti: rejected join: ", why);
      peer.conn->send_frame(FrameType::join, Tag{}, 0, std::as_bytes(std::span(why)), kFlagRejected);
      peer.alive = false;
    };
    protocol::JoinRequest req;
    try {
      req = protocol::decode_join(f.body);
    } catch (const Error& e) {
      reject(e.what());
      return;
    }
    if (decentralized != (opts.rti.mode == CoordinationMode::decentralized)) {
      reject("federate '" + req.federate + "' uses a different coordination mode than the RTI");
      return;
    }
    FederateIndex idx;
    try {
      idx = rti.register_federate(req.federate, req.physical_clock);
    } catch (const Error& e) {
      reject(e.what());
      return;
    }
    peer.index = idx;
    peer.listen_address = req.listen_address;
    by_index[idx] = &peer;
    log::debug("rti: federate '", req.federate, "' joined as ", idx);
    peer.conn->send_frame(FrameType::join, Tag{}, idx, {}, kFlagAccepted);
    if (rti.all_registered()) start_federation();
  }

  void on_frame(Peer& peer, const FrameView& f) {
    const auto me = *peer.index;
    switch (f.header.type) {
      case FrameType::net:
        emit(rti.handle_net(me, f.header.tag));
        break;
      case FrameType::ltc:
        emit(rti.handle_ltc(me, f.header.tag));
        break;
      case FrameType::stop:
        if (auto stop = rti.initiate_shutdown(f.header.tag)) broadcast_stop(*stop);
        break;
      case FrameType::resign:
        resign(me);
        break;
      case FrameType::tagged_msg:
      case FrameType::obj_ref: {
        const auto port = f.header.port;
        const auto& conns = rti.topology().connections;
        if (port >= conns.size() || rti.topology().require_index(conns[port].source) != me) {
          throw Error(Errc::protocol, "federate '" + rti.record(me).id + "' sent on a connection it does not own");
        }
        const auto dest = rti.topology().require_index(conns[port].destination);
        if (!rti.handle_forward(dest, f.header.tag)) {
          log::error("rti: message tagged ", f.header.tag, " for '", rti.record(dest).id,
                     "' arrived after its grant ", rti.record(dest).tag_grant);
        }
        send_to(dest, f.header.type, f.header.tag, f.body, port, f.header.flags);
        ++stats.messages_forwarded;
        break;
      }
      case FrameType::ping:
        peer.conn->send_frame(f.header, f.body);
        break;
      default:
        throw Error(Errc::protocol, "unexpected " + std::string(to_string(f.header.type)) + " frame");
    }
  }

  void serve(Peer& peer) {
    try {
      for (;;) {
        auto f = peer.conn->recv_frame();
        std::lock_guard lock(mu);
        if (!peer.index) {
          if (f.header.type != FrameType::join) throw Error(Errc::protocol, "first frame must be JOIN");
          on_join(peer, f);
          if (!peer.alive) break;
          continue;
        }
        try {
          on_frame(peer, f);
        } catch (const Error& e) {
          if (e.code() != Errc::protocol) throw;
          ++stats.protocol_errors;
          log::error("rti: protocol error from '", rti.record(*peer.index).id, "': ", e.what());
          peer.alive = false;
          peer.conn->shutdown();
          resign(*peer.index);
          return;
        }
        if (f.header.type == FrameType::resign) break;
      }
    } catch (const Error& e) {
      if (e.code() != Errc::closed) log::warn("rti: connection error: ", e.what());
    }
    std::lock_guard lock(mu);
    peer.alive = false;
    if (peer.index && rti.phase() != FederationPhase::registering) resign(*peer.index);
    done_cv.notify_all();
  }

  void accept_loop() {
    while (!finished()) {
      std::optional<Connection> c;
      try {
        c = listener.accept_for(std::chrono::milliseconds(50));
      } catch (const Error& e) {
        if (stopping.load()) break;
        log::warn("rti: accept failed: ", e.what());
        continue;
      }
      if (!c) continue;
      std::lock_guard lock(mu);
      peers.push_back(Peer{std::make_unique<Connection>(std::move(*c)), std::nullopt, {}, true});
      Peer* p = &peers.back();
      handlers.emplace_back([this, p] { serve(*p); });
    }
  }
};

RtiServer::RtiServer(RtiServerOptions opts) : impl_(std::make_unique<Impl>(std::move(opts))) {}

RtiServer::~RtiServer() {
  stop();
  for (auto& t : impl_->handlers) {
    if (t.joinable()) t.join();
  }
}

Endpoint RtiServer::endpoint() const { return impl_->listener.endpoint(); }

void RtiServer::run() {
  std::thread acceptor([this] { impl_->accept_loop(); });
  {
    std::unique_lock lock(impl_->mu);
    impl_->done_cv.wait(lock, [this] { return impl_->finished(); });
    for (auto& p : impl_->peers) p.conn->shutdown();
  }
  impl_->stopping.store(true);
  acceptor.join();
  for (auto& t : impl_->handlers) {
    if (t.joinable()) t.join();
  }
  impl_->handlers.clear();
}

void RtiServer::stop() noexcept {
  impl_->stopping.store(true);
  std::lock_guard lock(impl_->mu);
  for (auto& p : impl_->peers) p.conn->shutdown();
  impl_->done_cv.notify_all();
}

void RtiServer::request_shutdown() {
  std::lock_guard lock(impl_->mu);
  if (auto stop = impl_->rti.initiate_shutdown()) impl_->broadcast_stop(*stop);
}

RtiSummary RtiServer::summary() const {
  std::lock_guard lock(impl_->mu);
  auto s = impl_->stats;
  s.safety_violations = impl_->rti.safety_violations();
  return s;
}

}  // namespace hprm

#include "hprm/federate.hpp"

#include "hprm/error.hpp"
#include "hprm/log.hpp"
#include "hprm/object_store.hpp"
#include "hprm/protocol.hpp"
#include "hprm/store_client.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <mutex>
#include <set>
#include <thread>

namespace hprm {

FederateConfig FederateConfig::from_env(std::string id) {
  FederateConfig cfg;
  cfg.id = std::move(id);
  if (const char* v = std::getenv("HPRM_RTI_ADDR"); v && *v) cfg.rti_address = v;
  if (const char* v = std::getenv("HPRM_STORE_PATH"); v && *v) cfg.store_path = v;
  if (const char* v = std::getenv("HPRM_MODE"); v && *v) cfg.mode = parse_mode(v);
  if (const char* v = std::getenv("HPRM_STP_OFFSET_NS"); v && *v) cfg.stp_offset = Nanos{std::stoll(v)};
  return cfg;
}

namespace {

enum class TriggerKind { input, output, timer, action, startup, shutdown };

struct TriggerInfo {
  std::string name;
  TriggerKind kind;
};

struct Timer {
  TriggerId trigger;
  Nanos offset;
  Nanos period;
};

struct Inbound {
  enum class Kind { event, grant, stop, link_closed, failure };
  Kind kind = Kind::event;
  Tag tag;
  Event event;
  std::int64_t release = 0;
  int link = 0;
  std::string error;
};

constexpr int kRtiLink = 0;
constexpr auto kMaxWait = std::chrono::milliseconds(50);

template <typename F> auto retry_refused(Nanos budget, F&& attempt) {
  const auto deadline = monotonic_now() + budget.count();
  for (;;) {
    try {
      return attempt();
    } catch (const Error& e) {
      if (e.code() != Errc::refused || monotonic_now() >= deadline) throw;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

}  // namespace

struct Federate::Impl {
  Federate* owner;
  FederateConfig cfg;
  Topology topo;
  FederateIndex self = 0;
  std::shared_ptr<Clock> clock;

  std::vector<TriggerInfo> triggers;
  std::map<std::string, TriggerId, std::less<>> trigger_ids;
  std::vector<TriggerId> link_trigger;  // connection index -> input trigger
  std::vector<Timer> timers;
  std::vector<Reaction> reactions;

  Scheduler sched;
  Tag start = Tag::never();
  std::optional<Tag> stop;
  bool shutdown_scheduled = false;

  std::unique_ptr<Connection> rti;
  std::unique_ptr<Listener> listener;
  std::map<FederateIndex, std::unique_ptr<Connection>> downstream;
  std::set<FederateIndex> departed;
  std::vector<std::unique_ptr<Connection>> upstream;
  std::shared_ptr<StoreClient> store;

  std::mutex mu;
  std::condition_variable cv;
  std::deque<Inbound> inbox;
  std::map<int, std::int64_t> link_release;
  std::vector<std::thread> threads;
  std::atomic<bool> halting{false};
  std::atomic<bool> stop_requested{false};
  bool stop_sent = false;
  int next_link = 1;

  mutable std::mutex stats_mu;
  FederateStats counters;
  std::vector<TraceRecord> trace;

  Impl(Federate* o, FederateConfig c, Topology t)
      : owner(o), cfg(std::move(c)), topo(std::move(t)), sched(cfg.mode, cfg.stp_offset) {
    cfg.timing.validate();
    auto idx = topo.index_of(cfg.id);
    if (!idx) throw std::invalid_argument("federate '" + cfg.id + "' is not in the topology");
    self = *idx;
    // Only inputs can be late, so a federate without any waits on no offset.
    if (topo.inbound(cfg.id).empty()) sched = Scheduler(cfg.mode, Nanos{0});
    clock = cfg.clock ? cfg.clock : std::make_shared<SystemClock>();
    declare("startup", TriggerKind::startup);
    declare("shutdown", TriggerKind::shutdown);
    link_trigger.resize(topo.connections.size(), 0);
    for (std::size_t i = 0; i < topo.connections.size(); ++i) {
      const auto& l = topo.connections[i];
      if (l.destination == cfg.id) link_trigger[i] = declare(l.destination_port, TriggerKind::input);
      if (l.source == cfg.id) declare(l.source_port, TriggerKind::output);
    }
  }

  TriggerId declare(const std::string& name, TriggerKind kind) {
    if (auto it = trigger_ids.find(name); it != trigger_ids.end()) {
      if (triggers[it->second].kind != kind) {
        throw std::invalid_argument("name '" + name + "' is already used by another port, timer or action");
      }
      return it->second;
    }
    auto id = static_cast<TriggerId>(triggers.size());
    triggers.push_back({name, kind});
    trigger_ids.emplace(name, id);
    return id;
  }

  template <typename F> void bump(F&& f) {
    std::lock_guard lock(stats_mu);
    f(counters);
  }

  bool has_reaction_on(TriggerId t) const {
    for (const auto& r : reactions) {
      for (const auto& name : r.triggers) {
        if (trigger_ids.at(name) == t) return true;
      }
    }
    return false;
  }

  // ---------------------------------------------------------------------
  // Inbound path (receiver threads).

  void post(Inbound in) {
    {
      std::lock_guard lock(mu);
      auto& last = link_release[in.link];
      in.release = std::max(in.release, last);
      last = in.release;
      inbox.push_back(std::move(in));
    }
    cv.notify_all();
  }

  std::int64_t latency_for(const FrameView& f) const {
    auto l = cfg.injected_latency.count();
    if ((f.header.type == FrameType::tagged_msg || f.header.type == FrameType::obj_ref) &&
        f.header.port < topo.connections.size() && !cfg.extra_latency_from.empty()) {
      auto it = cfg.extra_latency_from.find(topo.connections[f.header.port].source);
      if (it != cfg.extra_latency_from.end()) l += it->second.count();
    }
    return l;
  }

  void receive_loop(Connection& conn, int link) {
    std::map<std::uint32_t, std::vector<std::byte>> partial;
    try {
      for (;;) {
        auto f = conn.recv_frame();
        Inbound in;
        in.link = link;
        in.tag = f.header.tag;
        in.release = monotonic_now() + latency_for(f);
        switch (f.header.type) {
          case FrameType::tag_grant:
            in.kind = Inbound::Kind::grant;
            break;
          case FrameType::stop:
            in.kind = Inbound::Kind::stop;
            break;
          case FrameType::tagged_msg:
          case FrameType::obj_ref: {
            const auto port = f.header.port;
            if (port >= topo.connections.size() || topo.connections[port].destination != cfg.id) {
              throw Error(Errc::protocol, "message on connection " + std::to_string(port) + " is not addressed here");
            }
            auto msg = std::make_shared<Message>();
            if (f.header.type == FrameType::obj_ref) {
              if (!store) throw Error(Errc::precondition, "received an object reference but no store is connected");
              msg->payload = store->fetch(ObjectRef::decode(f.body), std::chrono::seconds(5));
            } else {
              auto& acc = partial[port];
              acc.insert(acc.end(), f.body.begin(), f.body.end());
              if (f.header.flags & kFlagMoreFragments) continue;
              msg->payload = decode_inline(Buffer::adopt(std::move(acc)));
              partial.erase(port);
            }
            in.kind = Inbound::Kind::event;
            in.event = Event{f.header.tag, link_trigger[port], std::move(msg)};
            break;
          }
          default:
            continue;
        }
        post(std::move(in));
      }
    } catch (const Error& e) {
      Inbound in;
      in.link = link;
      in.release = monotonic_now();
      if (e.code() == Errc::closed) {
        in.kind = Inbound::Kind::link_closed;
      } else {
        in.kind = Inbound::Kind::failure;
        in.error = e.what();
      }
      if (!halting.load()) post(std::move(in));
    }
  }

  void accept_loop() {
    while (!halting.load()) {
      std::optional<Connection> c;
      try {
        c = listener->accept_for(kMaxWait);
      } catch (const Error&) {
        break;
      }
      if (!c) continue;
      try {
        auto hello = c->recv_frame_for(std::chrono::seconds(5));
        if (!hello || hello->header.type != FrameType::join || !(hello->header.flags & protocol::kFlagPeerHello)) {
          log::warn(cfg.id, ": dropping peer connection without a hello");
          continue;
        }
      } catch (const Error& e) {
        log::warn(cfg.id, ": peer hello failed: ", e.what());
        continue;
      }
      std::lock_guard lock(mu);
      upstream.push_back(std::make_unique<Connection>(std::move(*c)));
      Connection* conn = upstream.back().get();
      const int link = next_link++;
      threads.emplace_back([this, conn, link] { receive_loop(*conn, link); });
    }
  }

  // ---------------------------------------------------------------------
  // Executor.

  void send_rti(FrameType type, Tag tag) {
    if (rti) rti->send_frame(type, tag);
  }

  void report_net() {
    if (cfg.mode != CoordinationMode::centralized) return;
    if (auto net = sched.net_update()) {
      send_rti(FrameType::net, *net);
      bump([](FederateStats& s) { ++s.net_reports; });
    }
  }

  void schedule_shutdown() {
    if (shutdown_scheduled || !stop) return;
    shutdown_scheduled = true;
    const auto id = trigger_ids.at("shutdown");
    if (*stop > sched.current() && has_reaction_on(id)) sched.push(Event{*stop, id, nullptr});
  }

  void handle_late(Event& e) {
    const auto lateness = Nanos{sched.current().time() - e.tag.time()};
    bool handled = false;
    ReactionContext ctx(owner, sched.current());
    ctx.present_[e.trigger] = &e;
    for (auto& r : sorted_reactions_for({e.trigger})) {
      if (!r->on_stp_violation) continue;
      r->on_stp_violation(ctx, lateness);
      handled = true;
    }
    bump([&](FederateStats& s) {
      ++s.stp_violations;
      if (handled) ++s.stp_handled;
      else ++s.stp_dropped;
    });
  }

  /// Returns false when the RTI is gone and execution must end.
  bool apply(Inbound& in) {
    switch (in.kind) {
      case Inbound::Kind::event: {
        if (in.event.message) in.event.message->arrival = in.release;
        switch (sched.push(in.event)) {
          case Admission::queued:
            bump([](FederateStats& s) { ++s.messages_received; });
            break;
          case Admission::late:
            bump([](FederateStats& s) { ++s.messages_received; });
            handle_late(in.event);
            break;
          case Admission::fault:
            throw Error(Errc::ordering_fault, "message tagged " + to_string(in.event.tag) + " arrived after tag " +
                                                  to_string(sched.current()) + " began");
        }
        return true;
      }
      case Inbound::Kind::grant:
        sched.set_grant(in.tag);
        bump([](FederateStats& s) { ++s.grants_received; });
        return true;
      case Inbound::Kind::stop:
        if (!stop || in.tag < *stop) stop = in.tag;
        schedule_shutdown();
        return true;
      case Inbound::Kind::link_closed:
        if (in.link == kRtiLink && cfg.mode == CoordinationMode::centralized) {
          log::error(cfg.id, ": lost the RTI connection; shutting down");
          bump([](FederateStats& s) { s.rti_lost = true; });
          return false;
        }
        return true;
      case Inbound::Kind::failure:
        throw Error(Errc::protocol, cfg.id + ": " + in.error);
    }
    return true;
  }

  /// Applies every inbound item whose release time has passed. Returns the
  /// earliest pending release time, if any, via `next_release`.
  bool drain(std::optional<std::int64_t>& next_release) {
    std::vector<Inbound> ready;
    {
      std::lock_guard lock(mu);
      const auto now = monotonic_now();
      next_release.reset();
      for (auto it = inbox.begin(); it != inbox.end();) {
        if (it->release <= now) {
          ready.push_back(std::move(*it));
          it = inbox.erase(it);
        } else {
          if (!next_release || it->release < *next_release) next_release = it->release;
          ++it;
        }
      }
    }
    for (auto& in : ready) {
      if (!apply(in)) return false;
    }
    return true;
  }

  /// Sleeps until an inbound item arrives, the next release time passes, or
  /// the federate clock reaches `clock_target`.
  void wait(std::optional<std::int64_t> next_release, std::optional<std::int64_t> clock_target) {
    auto deadline = monotonic_now() + std::chrono::duration_cast<Nanos>(kMaxWait).count();
    if (next_release) deadline = std::min(deadline, *next_release);
    if (clock_target) deadline = std::min(deadline, monotonic_now() + (*clock_target - clock->now()));
    std::unique_lock lock(mu);
    const auto pending = inbox.size();
    cv.wait_for(lock, Nanos{std::max<std::int64_t>(deadline - monotonic_now(), 0)}, [&] {
      return inbox.size() != pending || stop_requested.load();
    });
  }

  std::vector<Reaction*> sorted_reactions_for(const std::set<TriggerId>& present) {
    std::vector<Reaction*> out;
    for (auto& r : reactions) {
      for (const auto& name : r.triggers) {
        if (present.count(trigger_ids.at(name))) {
          out.push_back(&r);
          break;
        }
      }
    }
    std::stable_sort(out.begin(), out.end(), [](const Reaction* a, const Reaction* b) { return a->order < b->order; });
    return out;
  }

  void execute(Tag g) {
    auto events = sched.take(g);
    const auto began = clock->now();
    if (cfg.record_trace) trace.push_back(TraceRecord{g, began, sched.grant()});
    ReactionContext ctx(owner, g);
    std::set<TriggerId> present;
    for (auto& e : events) {
      ctx.present_[e.trigger] = &e;
      present.insert(e.trigger);
    }
    for (auto* r : sorted_reactions_for(present)) {
      const auto lateness = Nanos{clock->now() - g.time()};
      if (r->deadline && lateness > *r->deadline) {
        bump([](FederateStats& s) { ++s.deadline_misses; });
        if (r->on_deadline_miss) r->on_deadline_miss(ctx, lateness);
      } else if (r->body) {
        r->body(ctx);
      }
      bump([](FederateStats& s) { ++s.reactions_run; });
    }
    for (const auto& t : timers) {
      if (!present.count(t.trigger) || t.period.count() <= 0) continue;
      Tag next{g.time() + t.period.count(), 0};
      if (stop && next > *stop) continue;
      sched.push(Event{next, t.trigger, nullptr});
    }
    sched.complete(g);
    bump([](FederateStats& s) { ++s.tags_executed; });
    report_net();
    send_rti(FrameType::ltc, g);
  }

  void maybe_send_stop() {
    if (!stop_requested.load() || stop_sent) return;
    stop_sent = true;
    Tag proposal = sched.current().is_never() ? start : sched.current();
    send_rti(FrameType::stop, proposal);
  }

  void event_loop() {
    std::optional<std::int64_t> next_release;
    for (;;) {
      if (!drain(next_release)) return;
      maybe_send_stop();
      const Tag head = sched.head();
      report_net();
      const auto now = clock->now();
      if (stop && head > *stop) {
        if (sched.may_halt(*stop, now)) return;
        std::optional<std::int64_t> target;
        if (cfg.mode == CoordinationMode::decentralized) target = sched.release_time(*stop);
        wait(next_release, target);
        continue;
      }
      if (head.is_forever()) {
        wait(next_release, std::nullopt);
        continue;
      }
      if (sched.may_execute(head, now)) {
        execute(head);
        continue;
      }
      std::optional<std::int64_t> target;
      if (now < sched.release_time(head)) target = sched.release_time(head);
      wait(next_release, target);
    }
  }

  // ---------------------------------------------------------------------
  // Startup and shutdown.

  void join_federation() {
    if (cfg.mode == CoordinationMode::decentralized) {
      listener = std::make_unique<Listener>(Endpoint{cfg.listen_host, 0}, cfg.transport);
    }
    if (!cfg.store_path.empty()) {
      try {
        store = StoreClient::connect(cfg.store_path);
      } catch (const Error& e) {
        log::warn(cfg.id, ": object store unavailable (", e.what(), "); large payloads go inline");
      }
    }
    const auto rti_ep = Endpoint::parse(cfg.rti_address);
    rti = std::make_unique<Connection>(
        retry_refused(std::chrono::seconds(10), [&] { return connect(rti_ep, cfg.transport); }));
    protocol::JoinRequest req{cfg.id, clock->now(), listener ? listener->endpoint().to_string() : std::string{}};
    rti->send_frame(FrameType::join, Tag{}, 0, protocol::encode(req),
                    cfg.mode == CoordinationMode::decentralized ? kFlagDecentralized : 0);
    auto reply = rti->recv_frame();
    if (reply.header.type != FrameType::join) throw Error(Errc::protocol, "expected a JOIN reply");
    if (reply.header.flags & kFlagRejected) {
      throw Error(Errc::refused, "RTI rejected '" + cfg.id + "': " +
                                     std::string(reinterpret_cast<const char*>(reply.body.data()), reply.body.size()));
    }
    if (reply.header.port != self) throw Error(Errc::protocol, "RTI assigned an unexpected federate index");
    auto start_frame = rti->recv_frame();
    if (start_frame.header.type != FrameType::start) throw Error(Errc::protocol, "expected START");
    start = start_frame.header.tag;
    auto info = protocol::decode_start(start_frame.body);
    stop = info.stop_tag;
    log::debug(cfg.id, ": start tag ", start);

    if (cfg.mode == CoordinationMode::decentralized) {
      std::set<FederateIndex> dests;
      for (auto i : topo.outbound(cfg.id)) dests.insert(topo.require_index(topo.connections[i].destination));
      for (auto d : dests) {
        if (d >= info.peer_addresses.size() || info.peer_addresses[d].empty()) {
          throw Error(Errc::protocol, "no address for peer '" + topo.federates[d] + "'");
        }
        auto ep = Endpoint::parse(info.peer_addresses[d]);
        auto conn = std::make_unique<Connection>(
            retry_refused(std::chrono::seconds(10), [&] { return connect(ep, cfg.transport); }));
        conn->send_frame(FrameType::join, Tag{}, self, {}, protocol::kFlagPeerHello);
        downstream.emplace(d, std::move(conn));
      }
      threads.emplace_back([this] { accept_loop(); });
    }
    threads.emplace_back([this] { receive_loop(*rti, kRtiLink); });
  }

  void seed_events() {
    const auto startup = trigger_ids.at("startup");
    if (has_reaction_on(startup)) sched.push(Event{start, startup, nullptr});
    for (const auto& t : timers) {
      Tag first{start.time() + t.offset.count(), 0};
      if (stop && first > *stop) continue;
      sched.push(Event{first, t.trigger, nullptr});
    }
    schedule_shutdown();
  }

  void leave() {
    halting.store(true);
    try {
      if (rti) rti->send_frame(FrameType::resign, sched.completed());
    } catch (const Error&) {
    }
    {
      std::lock_guard lock(mu);
      if (listener) listener->shutdown();
      for (auto& [_, c] : downstream) c->shutdown();
      for (auto& c : upstream) c->shutdown();
      if (rti) rti->shutdown();
    }
    for (std::size_t i = 0;; ++i) {
      std::thread t;
      {
        std::lock_guard lock(mu);
        if (i >= threads.size()) break;
        t = std::move(threads[i]);
      }
      if (t.joinable()) t.join();
    }
  }

  // ---------------------------------------------------------------------
  // Publishing.

  Connection& link_to(FederateIndex dest) {
    if (cfg.mode == CoordinationMode::centralized) return *rti;
    return *downstream.at(dest);
  }

  void publish(Tag g, std::string_view port, const SerializedPayload& payload) {
    auto it = trigger_ids.find(port);
    if (it == trigger_ids.end() || triggers[it->second].kind != TriggerKind::output) {
      throw Error(Errc::precondition, "'" + std::string(port) + "' is not an output port of " + cfg.id);
    }
    const auto links = topo.outbound(cfg.id, port);
    if (links.empty()) return;
    const auto eager = std::min(cfg.inline_threshold, cfg.transport.eager_buffer_bytes);
    const bool fits_inline = payload.encoded_size() + kFrameHeaderSize <= eager;

    std::optional<std::vector<std::byte>> ref_body;
    if (!fits_inline && store) {
      try {
        ref_body = store->put(payload).encode();
      } catch (const Error& e) {
        log::warn(cfg.id, ": store write failed (", e.what(), "); sending inline fragments");
      }
    }
    std::vector<std::byte> inline_body;
    if (!ref_body) inline_body = encode_inline(payload);

    std::size_t sent = 0;
    for (auto idx : links) {
      const auto& l = topo.connections[idx];
      const Tag tag = delay_tag(g, l.delay);
      const auto dest = topo.require_index(l.destination);
      if (departed.count(dest)) continue;
      auto& conn = link_to(dest);
      const auto port_id = static_cast<std::uint32_t>(idx);
      try {
        if (ref_body) {
          conn.send_frame(FrameType::obj_ref, tag, port_id, *ref_body);
        } else if (fits_inline) {
          conn.send_frame(FrameType::tagged_msg, tag, port_id, inline_body);
        } else {
          const auto chunk = eager - kFrameHeaderSize;
          std::span<const std::byte> rest(inline_body);
          while (!rest.empty()) {
            auto piece = rest.first(std::min(chunk, rest.size()));
            rest = rest.subspan(piece.size());
            conn.send_frame(FrameType::tagged_msg, tag, port_id, piece, rest.empty() ? 0 : kFlagMoreFragments);
          }
        }
        ++sent;
      } catch (const Error& e) {
        // A decentralized peer halts on its own once it is past the stop tag;
        // later sends to it have nowhere to go.
        if (e.code() != Errc::closed || cfg.mode != CoordinationMode::decentralized) throw;
        log::debug(cfg.id, ": peer '", l.destination, "' has left; dropping messages to it");
        departed.insert(dest);
      }
    }
    bump([&](FederateStats& s) {
      s.messages_sent += sent;
      if (ref_body) ++s.store_publishes;
      else if (fits_inline) ++s.inline_publishes;
      else ++s.fragmented_publishes;
    });
  }

  void schedule_action(Tag g, std::string_view action, Nanos delay, Value value) {
    auto it = trigger_ids.find(action);
    if (it == trigger_ids.end() || triggers[it->second].kind != TriggerKind::action) {
      throw Error(Errc::precondition, "'" + std::string(action) + "' is not an action of " + cfg.id);
    }
    if (delay.count() < 0) throw Error(Errc::precondition, "action delay must be non-negative");
    auto msg = std::make_shared<Message>();
    msg->value = std::move(value);
    msg->arrival = monotonic_now();
    const Tag tag = delay_tag(g, Delay(delay));
    if (stop && tag > *stop) return;
    sched.push(Event{tag, it->second, std::move(msg)});
  }
};

// ---------------------------------------------------------------------------

Federate::Federate(FederateConfig config, Topology topology)
    : impl_(std::make_unique<Impl>(this, std::move(config), std::move(topology))) {}

Federate::~Federate() {
  if (!impl_->halting.load() && !impl_->threads.empty()) impl_->leave();
}

void Federate::add_timer(std::string name, Nanos offset, Nanos period) {
  if (offset.count() < 0 || period.count() < 0) throw std::invalid_argument("timer offset and period must be >= 0");
  auto id = impl_->declare(name, TriggerKind::timer);
  impl_->timers.push_back(Timer{id, offset, period});
}

void Federate::add_action(std::string name) { impl_->declare(name, TriggerKind::action); }

void Federate::add_reaction(Reaction reaction) {
  if (reaction.deadline && reaction.deadline->count() <= 0) {
    throw std::invalid_argument("reaction deadline must be positive");
  }
  for (const auto& t : reaction.triggers) {
    auto it = impl_->trigger_ids.find(t);
    if (it == impl_->trigger_ids.end() || impl_->triggers[it->second].kind == TriggerKind::output) {
      throw std::invalid_argument("reaction '" + reaction.name + "' has unknown trigger '" + t + "'");
    }
  }
  impl_->reactions.push_back(std::move(reaction));
}

void Federate::run() {
  auto& m = *impl_;
  m.join_federation();
  std::exception_ptr failure;
  try {
    m.seed_events();
    m.event_loop();
  } catch (...) {
    failure = std::current_exception();
  }
  m.leave();
  if (failure) {
    try {
      std::rethrow_exception(failure);
    } catch (const Error& e) {
      if (e.code() == Errc::ordering_fault || e.code() == Errc::protocol) throw;
      throw Error(Errc::reaction_failed, m.cfg.id + ": " + e.what());
    } catch (const std::exception& e) {
      throw Error(Errc::reaction_failed, m.cfg.id + ": " + e.what());
    }
  }
}

void Federate::request_stop() {
  impl_->stop_requested.store(true);
  impl_->cv.notify_all();
}

const FederateConfig& Federate::config() const noexcept { return impl_->cfg; }
const Topology& Federate::topology() const noexcept { return impl_->topo; }

FederateStats Federate::stats() const {
  std::lock_guard lock(impl_->stats_mu);
  return impl_->counters;
}

const std::vector<TraceRecord>& Federate::trace() const noexcept { return impl_->trace; }
Tag Federate::start_tag() const noexcept { return impl_->start; }
std::optional<Tag> Federate::stop_tag() const noexcept { return impl_->stop; }
bool Federate::store_connected() const noexcept { return impl_->store != nullptr; }

// ---------------------------------------------------------------------------

Tag ReactionContext::start_tag() const noexcept { return fed_->impl_->start; }
std::int64_t ReactionContext::physical_time() const noexcept { return fed_->impl_->clock->now(); }

Event* ReactionContext::find(std::string_view trigger) const {
  auto it = fed_->impl_->trigger_ids.find(trigger);
  if (it == fed_->impl_->trigger_ids.end()) return nullptr;
  auto p = present_.find(it->second);
  return p == present_.end() ? nullptr : p->second;
}

bool ReactionContext::is_present(std::string_view trigger) const { return find(trigger) != nullptr; }

const Value& ReactionContext::value(std::string_view trigger) {
  auto* e = find(trigger);
  if (e == nullptr || !e->message) {
    throw Error(Errc::precondition, "'" + std::string(trigger) + "' carries no value at " + to_string(tag_));
  }
  if (!e->message->value) e->message->value = deserialize(e->message->payload);
  return *e->message->value;
}

const SerializedPayload& ReactionContext::payload(std::string_view trigger) const {
  auto* e = find(trigger);
  if (e == nullptr || !e->message) {
    throw Error(Errc::precondition, "'" + std::string(trigger) + "' carries no payload at " + to_string(tag_));
  }
  return e->message->payload;
}

std::int64_t ReactionContext::arrival_time(std::string_view trigger) const {
  auto* e = find(trigger);
  if (e == nullptr || !e->message) throw Error(Errc::precondition, "'" + std::string(trigger) + "' is absent");
  return e->message->arrival;
}

void ReactionContext::publish(std::string_view port, const Value& value) {
  publish(port, serialize(value, fed_->impl_->cfg.serde));
}

void ReactionContext::publish(std::string_view port, const SerializedPayload& payload) {
  fed_->impl_->publish(tag_, port, payload);
}

void ReactionContext::schedule(std::string_view action, Nanos delay, Value value) {
  fed_->impl_->schedule_action(tag_, action, delay, std::move(value));
}

void ReactionContext::request_stop() { fed_->impl_->stop_requested.store(true); }

}  // namespace hprm

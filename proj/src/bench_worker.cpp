// Worker processes launched by hprm-bench. Each runs one federate role (or a
// ping echo server) from a JSON config file and writes a JSON result file.

#include "hprm/bench.hpp"
#include "hprm/clock.hpp"
#include "hprm/error.hpp"
#include "hprm/federate.hpp"
#include "hprm/log.hpp"
#include "hprm/transport.hpp"

#include <json.hpp>

#include <fstream>
#include <iostream>

namespace hprm::bench {

using json = nlohmann::json;

namespace {

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot read " + path);
  return json::parse(in);
}

void write_json(const json& j, const std::string& path) {
  const auto tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error(Errc::io, "cannot write " + tmp);
    out << j.dump();
  }
  std::rename(tmp.c_str(), path.c_str());
}

json stats_json(const FederateStats& s) {
  return {{"tags_executed", s.tags_executed},     {"reactions_run", s.reactions_run},
          {"deadline_misses", s.deadline_misses}, {"stp_violations", s.stp_violations},
          {"stp_handled", s.stp_handled},         {"stp_dropped", s.stp_dropped},
          {"messages_received", s.messages_received}, {"messages_sent", s.messages_sent},
          {"store_publishes", s.store_publishes}, {"inline_publishes", s.inline_publishes},
          {"fragmented_publishes", s.fragmented_publishes}, {"rti_lost", s.rti_lost}};
}

FederateConfig federate_config(const json& c) {
  FederateConfig cfg;
  cfg.id = c.at("id").get<std::string>();
  cfg.mode = hprm::parse_mode(c.at("mode").get<std::string>());
  cfg.rti_address = c.at("rti").get<std::string>();
  cfg.store_path = c.value("store", std::string{});
  cfg.stp_offset = Nanos{c.value("stp_ns", std::int64_t{0})};
  cfg.injected_latency = Nanos{c.value("inject_latency_ns", std::int64_t{0})};
  if (c.contains("skew")) {
    for (auto& [src, ns] : c.at("skew").items()) cfg.extra_latency_from[src] = Nanos{ns.get<std::int64_t>()};
  }
  if (c.value("copy_baseline", false)) cfg.serde = SerdeOptions::force_in_band();
  return cfg;
}

/// The payload array: float64 when the size allows, bytes otherwise, with a
/// position-dependent fill so corruption would be visible.
TypedArray make_array(std::uint64_t size_bytes) {
  std::vector<std::byte> bytes(size_bytes);
  for (std::uint64_t i = 0; i < size_bytes; ++i) bytes[i] = static_cast<std::byte>((i * 131 + 7) & 0xFF);
  if (size_bytes % 8 == 0) return TypedArray(DType::float64, {size_bytes / 8}, Buffer::adopt(std::move(bytes)));
  return TypedArray(DType::uint8, {size_bytes}, Buffer::adopt(std::move(bytes)));
}

std::int64_t as_int(const Value& v, std::string_view key) { return v.as<Value::Map>().find(key)->second.as<std::int64_t>(); }

int run_publisher(const json& c) {
  Federate fed(federate_config(c), load_topology(c.at("topology").get<std::string>()));
  const auto period = Nanos{c.at("period_ns").get<std::int64_t>()};
  const auto offset = Nanos{c.value("offset_ns", std::int64_t{0})};
  const auto count = c.at("count").get<std::int64_t>();
  const auto stride = c.value("seq_stride", std::int64_t{1});
  const auto base = c.value("seq_base", std::int64_t{0});
  const auto size = c.value("size_bytes", std::uint64_t{0});
  const bool ordering = c.at("role") == "ordering-publisher";
  std::optional<TypedArray> data;
  if (size > 0) data = make_array(size);

  fed.add_timer("tick", offset, period);
  fed.add_reaction(Reaction{"publish", {"tick"}, 0, [&](ReactionContext& ctx) {
                              const auto k = (ctx.tag().time() - ctx.start_tag().time() - offset.count()) / period.count();
                              if (k >= count) return;
                              Value::Map m;
                              m.emplace("seq", Value(base + k * stride));
                              if (data) m.emplace("data", Value(*data));
                              m.emplace("t0", Value(static_cast<std::int64_t>(monotonic_now())));
                              ctx.publish("out", Value(std::move(m)));
                              (void)ordering;
                            }});
  fed.run();
  write_json({{"id", c.at("id")}, {"stats", stats_json(fed.stats())}, {"store", fed.store_connected()}},
             c.at("result").get<std::string>());
  return 0;
}

int run_subscriber(const json& c) {
  Federate fed(federate_config(c), load_topology(c.at("topology").get<std::string>()));
  const auto inputs = c.value("inputs", std::vector<std::string>{"in"});
  json received = json::array();
  std::uint64_t corrupt = 0;
  fed.add_reaction(Reaction{"consume", inputs, 0, [&](ReactionContext& ctx) {
                              for (const auto& port : inputs) {
                                if (!ctx.is_present(port)) continue;
                                const auto& v = ctx.value(port);
                                const auto done = monotonic_now();
                                const auto& m = v.as<Value::Map>();
                                if (auto it = m.find("data"); it != m.end()) {
                                  const auto& arr = it->second.as<TypedArray>();
                                  const auto n = arr.byte_size();
                                  auto at = [&](std::uint64_t i) {
                                    return std::to_integer<std::uint8_t>(arr.data.data()[i]);
                                  };
                                  if (n > 0 && (at(0) != 7 || at(n - 1) != static_cast<std::uint8_t>(((n - 1) * 131 + 7) & 0xFF))) {
                                    ++corrupt;
                                  }
                                }
                                received.push_back({as_int(v, "seq"), as_int(v, "t0"), done, port});
                              }
                            }});
  fed.run();
  write_json({{"id", c.at("id")}, {"received", received}, {"corrupt", corrupt}, {"stats", stats_json(fed.stats())},
              {"store", fed.store_connected()}},
             c.at("result").get<std::string>());
  return 0;
}

int run_ordering_subscriber(const json& c) {
  Federate fed(federate_config(c), load_topology(c.at("topology").get<std::string>()));
  const auto period = c.at("period_ns").get<std::int64_t>();
  std::int64_t last_seq = -1;
  std::uint64_t delivered = 0, out_of_order = 0, tag_mismatch = 0;
  json lags = json::array();
  Reaction r;
  r.name = "check";
  r.triggers = {"inA", "inB"};
  r.body = [&](ReactionContext& ctx) {
    for (const char* port : {"inA", "inB"}) {
      if (!ctx.is_present(port)) continue;
      const auto seq = as_int(ctx.value(port), "seq");
      ++delivered;
      if (seq <= last_seq) ++out_of_order;
      last_seq = std::max(last_seq, seq);
      const auto expected = ctx.start_tag().time() + (seq / 2) * period + (seq % 2) * (period / 2);
      if (ctx.tag().time() != expected) ++tag_mismatch;
      lags.push_back(ctx.physical_time() - ctx.tag().time());
    }
  };
  // Late inputs never reach the body; they are counted here instead.
  r.on_stp_violation = [&](ReactionContext&, Nanos) {};
  fed.add_reaction(std::move(r));
  fed.run();
  const auto s = fed.stats();
  write_json({{"id", c.at("id")},
              {"delivered", delivered},
              {"out_of_order", out_of_order},
              {"tag_mismatch", tag_mismatch},
              {"stp_violations", s.stp_violations},
              {"stp_handled", s.stp_handled},
              {"stp_dropped", s.stp_dropped},
              {"lags", lags},
              {"stats", stats_json(s)}},
             c.at("result").get<std::string>());
  return 0;
}

int run_echo(const json& c) {
  ConnectionOptions opts;
  opts.disable_coalescing = c.value("nodelay", true);
  Listener listener(Endpoint{"127.0.0.1", 0}, opts);
  {
    const auto path = c.at("address_file").get<std::string>();
    std::ofstream out(path + ".tmp");
    out << listener.endpoint().to_string();
    out.close();
    std::rename((path + ".tmp").c_str(), path.c_str());
  }
  auto conn = listener.accept_for(std::chrono::seconds(30));
  if (!conn) throw Error(Errc::timeout, "no ping client connected");
  serve_echo(*conn);
  return 0;
}

}  // namespace

int worker_main(const std::string& config_path) {
  log::init_from_env();
  try {
    const auto c = read_json(config_path);
    const auto role = c.at("role").get<std::string>();
    if (role == "publisher" || role == "ordering-publisher") return run_publisher(c);
    if (role == "subscriber" || role == "collector") return run_subscriber(c);
    if (role == "ordering-subscriber") return run_ordering_subscriber(c);
    if (role == "echo") return run_echo(c);
    std::cerr << "unknown worker role '" << role << "'\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "worker " << config_path << ": " << e.what() << "\n";
    return 1;
  }
}

}  // namespace hprm::bench

#include "hprm/bench.hpp"

#include "hprm/clock.hpp"
#include "hprm/error.hpp"
#include "hprm/log.hpp"
#include "hprm/object_store.hpp"
#include "hprm/process.hpp"
#include "hprm/rti.hpp"
#include "hprm/serde.hpp"
#include "hprm/store_client.hpp"
#include "hprm/topology.hpp"
#include "hprm/transport.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <fcntl.h>
#include <sys/mman.h>
#include <unistd.h>

namespace hprm::bench {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view to_string(Scenario s) noexcept {
  switch (s) {
    case Scenario::broadcast: return "broadcast";
    case Scenario::gather: return "gather";
    case Scenario::serde: return "serde";
    case Scenario::ordering: return "ordering";
    case Scenario::ping: return "ping";
    case Scenario::store: return "store";
  }
  return "?";
}

std::string_view to_string(Mode m) noexcept {
  switch (m) {
    case Mode::centralized: return "centralized";
    case Mode::decentralized: return "decentralized";
    case Mode::copy_baseline: return "copy-baseline";
  }
  return "?";
}

Scenario parse_scenario(std::string_view text) {
  for (auto s : {Scenario::broadcast, Scenario::gather, Scenario::serde, Scenario::ordering, Scenario::ping,
                 Scenario::store}) {
    if (text == to_string(s)) return s;
  }
  throw std::invalid_argument("unknown scenario '" + std::string(text) + "'");
}

Mode parse_mode(std::string_view text) {
  for (auto m : {Mode::centralized, Mode::decentralized, Mode::copy_baseline}) {
    if (text == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown mode '" + std::string(text) + "'");
}

void BenchConfig::validate() const {
  if (nodes < 2) throw std::invalid_argument("node count must be at least 2");
  if (sizes_bytes.empty()) throw std::invalid_argument("at least one payload size is required");
  for (auto s : sizes_bytes) {
    if (s == 0) throw std::invalid_argument("payload sizes must be positive");
  }
  if (warmup < 0) throw std::invalid_argument("warmup must be non-negative");
  if (iterations < 1) throw std::invalid_argument("iterations must be at least 1");
  if (modes.empty()) throw std::invalid_argument("at least one mode is required");
  if (runs < 1) throw std::invalid_argument("runs must be at least 1");
  if (period.count() <= 0) throw std::invalid_argument("period must be positive");
  if (inject_latency.count() < 0 || latency_skew.count() < 0) {
    throw std::invalid_argument("injected latency must be non-negative");
  }
  if (ping_count < 1) throw std::invalid_argument("ping count must be at least 1");
  if (nodelay_arms.empty()) throw std::invalid_argument("at least one ping arm is required");
  if (iteration_period && iteration_period->count() <= 0) throw std::invalid_argument("period must be positive");
}

Nanos BenchConfig::period_for(std::uint64_t size_bytes) const {
  if (iteration_period) return *iteration_period;
  const double mb = static_cast<double>(size_bytes) / static_cast<double>(kMegabyte);
  return std::chrono::milliseconds(20) + Nanos{static_cast<std::int64_t>(mb * 10e6)};
}

// ---------------------------------------------------------------------------
// Reporting.

std::int64_t percentile(std::vector<std::int64_t> samples, double q) {
  if (samples.empty()) throw Error(Errc::precondition, "percentile of an empty sample");
  if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("percentile rank must be in (0, 1]");
  std::sort(samples.begin(), samples.end());
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(samples.size())));
  rank = std::clamp<std::size_t>(rank, 1, samples.size());
  return samples[rank - 1];
}

std::vector<GroupSummary> summarize(const std::vector<LatencyRecord>& records) {
  std::vector<GroupSummary> out;
  std::vector<std::vector<std::int64_t>> samples;
  for (const auto& r : records) {
    auto it = std::find_if(out.begin(), out.end(), [&](const GroupSummary& g) {
      return g.scenario == r.scenario && g.mode == r.mode && g.size_bytes == r.size_bytes;
    });
    std::size_t i;
    if (it == out.end()) {
      out.push_back(GroupSummary{r.scenario, r.mode, r.size_bytes});
      samples.emplace_back();
      i = out.size() - 1;
    } else {
      i = static_cast<std::size_t>(it - out.begin());
    }
    samples[i].push_back(r.latency_ns);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& s = samples[i];
    out[i].count = s.size();
    long double sum = 0;
    for (auto v : s) sum += v;
    out[i].mean_ns = static_cast<double>(sum / s.size());
    out[i].median_ns = percentile(s, 0.5);
    out[i].p99_ns = percentile(s, 0.99);
  }
  return out;
}

std::string format_report(const std::vector<LatencyRecord>& records) {
  if (records.empty()) throw Error(Errc::precondition, "no latency records to report");
  std::ostringstream os;
  os << "scenario,mode,size_bytes,iter,latency_ns\n";
  for (const auto& r : records) {
    os << r.scenario << ',' << r.mode << ',' << r.size_bytes << ',' << r.iter << ',' << r.latency_ns << '\n';
  }
  os << "\n# summary\nscenario,mode,size_bytes,count,mean_ns,median_ns,p99_ns\n";
  char mean[64];
  for (const auto& g : summarize(records)) {
    std::snprintf(mean, sizeof mean, "%.3f", g.mean_ns);
    os << g.scenario << ',' << g.mode << ',' << g.size_bytes << ',' << g.count << ',' << mean << ',' << g.median_ns
       << ',' << g.p99_ns << '\n';
  }
  return os.str();
}

void emit_report(const std::vector<LatencyRecord>& records, const std::string& path) {
  const auto text = format_report(records);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write report to '" + path + "'");
  out << text;
  out.close();
  if (!out) throw Error(Errc::io, "failed writing report to '" + path + "'");
}

bool BenchOutcome::ok() const noexcept {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

void write_summary_json(const BenchOutcome& outcome, const std::string& path) {
  json j;
  j["ok"] = outcome.ok();
  j["groups"] = json::array();
  if (!outcome.records.empty()) {
    for (const auto& g : summarize(outcome.records)) {
      j["groups"].push_back({{"scenario", g.scenario},
                             {"mode", g.mode},
                             {"size_bytes", g.size_bytes},
                             {"count", g.count},
                             {"mean_ns", g.mean_ns},
                             {"median_ns", g.median_ns},
                             {"p99_ns", g.p99_ns}});
    }
  }
  j["metrics"] = json::object();
  for (const auto& [k, v] : outcome.metrics) j["metrics"][k] = v;
  j["checks"] = json::array();
  for (const auto& c : outcome.checks) j["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write summary to '" + path + "'");
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Process orchestration.

namespace {

constexpr auto kStartupOffset = std::chrono::milliseconds(300);
constexpr auto kReadyTimeout = std::chrono::seconds(10);

std::string size_label(std::uint64_t bytes) {
  std::ostringstream os;
  if (bytes % kMegabyte == 0) os << bytes / kMegabyte << "MB";
  else os << bytes << "B";
  return os.str();
}

class TempDir {
 public:
  explicit TempDir(bool keep) : keep_(keep) {
    std::string tmpl = (fs::temp_directory_path() / "hprm-bench-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) throw Error(Errc::io, "cannot create a temporary directory");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    if (keep_) log::info("kept temporary files in ", path_);
    else fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] std::string file(const std::string& name) const { return path_ + "/" + name; }

 private:
  std::string path_;
  bool keep_;
};

void write_json_file(const json& j, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + path);
  out << j.dump();
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "missing result file " + path);
  return json::parse(in);
}

/// Polls for a file a child writes once it is ready. Fails early if the child
/// exits first.
std::string wait_for_file(const std::string& path, ChildProcess& child, Nanos timeout) {
  const auto deadline = monotonic_now() + timeout.count();
  for (;;) {
    if (fs::exists(path)) {
      std::ifstream in(path);
      std::string text;
      std::getline(in, text);
      if (!text.empty()) return text;
    }
    if (auto status = child.wait_for(Nanos{0})) {
      throw Error(Errc::io, child.name() + " exited with status " + std::to_string(*status) + " before becoming ready");
    }
    if (monotonic_now() >= deadline) throw Error(Errc::timeout, child.name() + " did not become ready");
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
}

struct Tools {
  std::string bench;
  std::string rti;
  std::string store;

  explicit Tools(const BenchConfig& cfg) {
    const auto dir = cfg.bin_dir.empty() ? directory_of(current_executable()) : cfg.bin_dir;
    bench = dir + "/hprm-bench";
    rti = dir + "/hprm-rti";
    store = dir + "/hprm-store";
    for (const auto* p : {&bench, &rti, &store}) {
      if (::access(p->c_str(), X_OK) != 0) throw Error(Errc::io, "daemon executable not found: " + *p);
    }
  }
};

struct StoreDaemon {
  ChildProcess proc;
  std::shared_ptr<StoreClient> client;
  std::string socket;

  StoreDaemon(const Tools& tools, const TempDir& dir, std::uint64_t capacity) {
    socket = dir.file("store.sock");
    proc = ChildProcess::spawn({tools.store, "--socket", socket, "--capacity-bytes", std::to_string(capacity),
                                "--prefault"});
    const auto deadline = monotonic_now() + Nanos(kReadyTimeout).count();
    for (;;) {
      try {
        client = StoreClient::connect(socket, std::chrono::milliseconds(200));
        break;
      } catch (const Error&) {
        if (auto status = proc.wait_for(Nanos{0})) {
          throw Error(Errc::io, "hprm-store exited with status " + std::to_string(*status));
        }
        if (monotonic_now() >= deadline) throw Error(Errc::timeout, "hprm-store did not become ready");
      }
    }
  }
  ~StoreDaemon() {
    client.reset();
    proc.terminate();
  }
};

struct RtiDaemon {
  ChildProcess proc;
  std::string address;

  RtiDaemon(const Tools& tools, const TempDir& dir, const Topology& topo, CoordinationMode mode, Nanos timeout) {
    const auto topo_path = dir.file("topology.json");
    const auto addr_path = dir.file("rti.addr");
    std::error_code ec;
    fs::remove(addr_path, ec);
    save_topology(topo, topo_path);
    const auto offset_ms = std::chrono::duration_cast<std::chrono::milliseconds>(kStartupOffset).count();
    proc = ChildProcess::spawn({tools.rti, "--config", topo_path, "--listen", "127.0.0.1:0", "--address-file",
                                addr_path, "--mode", std::string(to_string(mode)), "--timeout-ns",
                                std::to_string(timeout.count()), "--startup-offset-ms", std::to_string(offset_ms)});
    address = wait_for_file(addr_path, proc, kReadyTimeout);
  }
};

/// Launches one worker per config and waits for all of them (and the RTI).
/// Returns each worker's result document.
std::vector<json> run_workers(const Tools& tools, const TempDir& dir, std::vector<json> configs, RtiDaemon& rti,
                              Nanos expected) {
  std::vector<ChildProcess> procs;
  std::vector<std::string> results;
  for (auto& c : configs) {
    const auto id = c.at("id").get<std::string>();
    const auto cfg_path = dir.file(id + ".json");
    results.push_back(dir.file(id + ".result.json"));
    c["result"] = results.back();
    c["rti"] = rti.address;
    write_json_file(c, cfg_path);
    procs.push_back(ChildProcess::spawn({tools.bench, "worker", cfg_path}));
  }
  const auto budget = expected + std::chrono::seconds(60);
  const auto deadline = monotonic_now() + budget.count();
  std::string failure;
  for (std::size_t i = 0; i < procs.size(); ++i) {
    auto status = procs[i].wait_for(Nanos{std::max<std::int64_t>(deadline - monotonic_now(), 0)});
    const auto id = configs[i].at("id").get<std::string>();
    if (!status) {
      failure = "worker " + id + " timed out";
      break;
    }
    if (*status != 0 && failure.empty()) failure = "worker " + id + " exited with status " + std::to_string(*status);
  }
  if (!failure.empty()) {
    for (auto& p : procs) p.terminate();
    rti.proc.terminate();
    throw Error(Errc::timeout, failure);
  }
  if (!rti.proc.wait_for(std::chrono::seconds(10))) {
    rti.proc.terminate();
    throw Error(Errc::timeout, "hprm-rti did not exit after every federate resigned");
  }
  std::vector<json> out;
  for (const auto& r : results) out.push_back(read_json_file(r));
  return out;
}

json base_worker(const std::string& id, const std::string& role, CoordinationMode mode, const std::string& topo_path) {
  return {{"id", id}, {"role", role}, {"mode", std::string(to_string(mode))}, {"topology", topo_path}};
}

CoordinationMode coordination_of(Mode m) {
  return m == Mode::centralized ? CoordinationMode::centralized : CoordinationMode::decentralized;
}

Topology star_topology(const std::string& hub, const std::vector<std::string>& spokes, bool hub_publishes) {
  Topology t;
  t.federates.push_back(hub);
  for (const auto& s : spokes) t.federates.push_back(s);
  for (std::size_t i = 0; i < spokes.size(); ++i) {
    if (hub_publishes) t.connections.push_back(Link{hub, "out", spokes[i], "in", Delay::none()});
    else t.connections.push_back(Link{spokes[i], "out", hub, "in" + std::to_string(i), Delay::none()});
  }
  return t;
}

std::uint64_t store_capacity_for(const BenchConfig& cfg) {
  if (cfg.store_capacity) return cfg.store_capacity;
  const auto largest = *std::max_element(cfg.sizes_bytes.begin(), cfg.sizes_bytes.end());
  return std::max<std::uint64_t>(256 * kMegabyte, 8 * largest);
}

void add_check(BenchOutcome& out, std::string name, bool passed, std::string detail) {
  log::info(passed ? "PASS " : "FAIL ", name, ": ", detail);
  out.checks.push_back(CheckResult{std::move(name), passed, std::move(detail)});
}

// ---------------------------------------------------------------------------
// Broadcast and gather.

struct GroupResult {
  std::vector<std::int64_t> latencies;  // measured iterations only
};

/// Counts creates and gets per object in an operation log slice and checks
/// the 1 create / `subscribers` gets pattern for every object.
void check_zero_copy(BenchOutcome& out, const std::vector<StoreLogRecord>& log, std::size_t expected_objects,
                     std::size_t subscribers, const std::string& label) {
  std::map<ObjectId, std::pair<std::size_t, std::size_t>> per_object;
  for (const auto& r : log) {
    if (r.op == StoreOp::create) ++per_object[r.id].first;
    if (r.op == StoreOp::get) ++per_object[r.id].second;
  }
  std::size_t good = 0;
  for (const auto& [_, counts] : per_object) {
    if (counts.first == 1 && counts.second == subscribers) ++good;
  }
  const bool ok = per_object.size() == expected_objects && good == expected_objects;
  std::ostringstream d;
  d << per_object.size() << " objects (expected " << expected_objects << "), " << good << " with exactly 1 create and "
    << subscribers << " gets";
  add_check(out, "zero-copy accounting " + label, ok, d.str());
  out.metrics["zero_copy." + label + ".objects"] = static_cast<double>(per_object.size());
  out.metrics["zero_copy." + label + ".conforming"] = static_cast<double>(good);
}

GroupResult run_fanout_group(const BenchConfig& cfg, const Tools& tools, Mode mode, std::uint64_t size,
                             BenchOutcome& out) {
  const bool gather = cfg.scenario == Scenario::gather;
  const auto label = std::string(to_string(cfg.scenario)) + "." + std::string(to_string(mode)) + "." + size_label(size);
  log::info("running ", label);
  TempDir dir(cfg.keep_temp);
  const auto coord = coordination_of(mode);
  const bool use_store = mode != Mode::copy_baseline;
  const auto period = cfg.period_for(size);
  const auto total = cfg.total_iterations();
  // Leave room after the last publish for slow deliveries to drain before
  // the stop tag.
  const auto drain = std::max<Nanos>(std::chrono::seconds(2), 10 * period);
  const auto timeout = total * period + drain;

  std::vector<std::string> spokes;
  for (std::size_t i = 1; i < cfg.nodes; ++i) spokes.push_back((gather ? "pub" : "sub") + std::to_string(i));
  const std::string hub = gather ? "collector" : "pub";
  const auto topo = star_topology(hub, spokes, !gather);

  std::optional<StoreDaemon> store;
  if (use_store) store.emplace(tools, dir, store_capacity_for(cfg));
  const auto log_start = store ? store->client->op_log().size() : 0;
  RtiDaemon rti(tools, dir, topo, coord, timeout);
  const auto topo_path = dir.file("topology.json");

  // A collector needs every publisher's message for a tag before it runs;
  // in decentralized mode that takes an explicit offset. Absent one, wait two
  // periods, which also covers the slow copy-baseline deliveries.
  Nanos stp = cfg.stp_offset;
  if (gather && coord == CoordinationMode::decentralized && stp.count() == 0) stp = 2 * period;

  auto worker = [&](const std::string& id, const std::string& role) {
    auto c = base_worker(id, role, coord, topo_path);
    if (store) c["store"] = store->socket;
    if (mode == Mode::copy_baseline) c["copy_baseline"] = true;
    return c;
  };
  std::vector<json> configs;
  if (gather) {
    auto c = worker(hub, "collector");
    std::vector<std::string> inputs;
    for (std::size_t i = 0; i < spokes.size(); ++i) inputs.push_back("in" + std::to_string(i));
    c["inputs"] = inputs;
    c["stp_ns"] = stp.count();
    configs.push_back(c);
    for (const auto& s : spokes) {
      auto p = worker(s, "publisher");
      p["period_ns"] = period.count();
      p["count"] = total;
      p["size_bytes"] = size;
      configs.push_back(p);
    }
  } else {
    auto p = worker(hub, "publisher");
    p["period_ns"] = period.count();
    p["count"] = total;
    p["size_bytes"] = size;
    configs.push_back(p);
    for (const auto& s : spokes) {
      auto c = worker(s, "subscriber");
      c["stp_ns"] = stp.count();
      configs.push_back(c);
    }
  }

  auto results = run_workers(tools, dir, configs, rti, kStartupOffset + timeout + stp);

  // seq -> (earliest t0, latest completion, deliveries)
  struct Agg {
    std::int64_t t0 = std::numeric_limits<std::int64_t>::max();
    std::int64_t done = std::numeric_limits<std::int64_t>::min();
    std::size_t deliveries = 0;
  };
  std::map<std::int64_t, Agg> by_seq;
  std::uint64_t corrupt = 0, violations = 0, store_publishes = 0;
  for (const auto& r : results) {
    violations += r.at("stats").at("stp_violations").get<std::uint64_t>();
    store_publishes += r.at("stats").at("store_publishes").get<std::uint64_t>();
    if (!r.contains("received")) continue;
    corrupt += r.at("corrupt").get<std::uint64_t>();
    for (const auto& row : r.at("received")) {
      auto& a = by_seq[row[0].get<std::int64_t>()];
      a.t0 = std::min(a.t0, row[1].get<std::int64_t>());
      a.done = std::max(a.done, row[2].get<std::int64_t>());
      ++a.deliveries;
    }
  }
  const std::size_t per_seq = spokes.size();
  GroupResult g;
  std::size_t complete = 0;
  for (const auto& [seq, a] : by_seq) {
    if (a.deliveries != per_seq) continue;
    ++complete;
    if (seq >= cfg.warmup) g.latencies.push_back(a.done - a.t0);
  }
  std::ostringstream d;
  d << complete << "/" << total << " iterations fully delivered, " << corrupt << " corrupt payloads, " << violations
    << " late inputs";
  add_check(out, "delivery " + label, complete == static_cast<std::size_t>(total) && corrupt == 0 && violations == 0,
            d.str());
  out.metrics["store_publishes." + label] = static_cast<double>(store_publishes);

  if (store && size + kFrameHeaderSize > kDefaultEagerBufferBytes) {
    auto log = store->client->op_log(log_start);
    check_zero_copy(out, log, static_cast<std::size_t>(total) * (gather ? spokes.size() : 1),
                    gather ? 1 : spokes.size(), label);
  }
  return g;
}

void run_fanout(const BenchConfig& cfg, BenchOutcome& out) {
  Tools tools(cfg);
  std::map<std::pair<Mode, std::uint64_t>, std::vector<std::int64_t>> measured;
  for (auto size : cfg.sizes_bytes) {
    for (auto mode : cfg.modes) {
      auto g = run_fanout_group(cfg, tools, mode, size, out);
      int iter = 0;
      for (auto v : g.latencies) {
        out.records.push_back(LatencyRecord{std::string(to_string(cfg.scenario)), std::string(to_string(mode)), size,
                                            iter++, v});
      }
      measured[{mode, size}] = std::move(g.latencies);
    }
  }
  const auto mean = [](const std::vector<std::int64_t>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  const auto scen = std::string(to_string(cfg.scenario));
  for (const auto& [key, v] : measured) {
    const auto label = scen + "." + std::string(to_string(key.first)) + "." + size_label(key.second);
    out.metrics["mean_ns." + label] = mean(v);
    if (!v.empty()) out.metrics["median_ns." + label] = static_cast<double>(percentile(v, 0.5));
  }
  for (auto size : cfg.sizes_bytes) {
    // Copy-baseline dominance applies to large payloads only.
    auto base = measured.find({Mode::copy_baseline, size});
    if (size >= 10 * kMegabyte && base != measured.end() && !base->second.empty()) {
      for (auto m : {Mode::centralized, Mode::decentralized}) {
        auto zc = measured.find({m, size});
        if (zc == measured.end() || zc->second.empty()) continue;
        std::ostringstream d;
        d << "mean " << mean(zc->second) / 1e6 << " ms vs copy-baseline " << mean(base->second) / 1e6 << " ms";
        add_check(out, "baseline dominance " + scen + "." + std::string(to_string(m)) + "." + size_label(size),
                  mean(zc->second) < mean(base->second), d.str());
      }
    }
    if (cfg.scenario != Scenario::broadcast) continue;
    auto cen = measured.find({Mode::centralized, size});
    auto dec = measured.find({Mode::decentralized, size});
    if (cen != measured.end() && dec != measured.end() && !cen->second.empty() && !dec->second.empty()) {
      const auto mc = percentile(cen->second, 0.5), md = percentile(dec->second, 0.5);
      std::ostringstream d;
      d << "median decentralized " << md / 1e6 << " ms vs centralized " << mc / 1e6 << " ms (10% band)";
      add_check(out, "mode ordering " + scen + "." + size_label(size), static_cast<double>(md) <= 1.1 * mc, d.str());
    }
  }
}

// ---------------------------------------------------------------------------
// Ordering stress.

void run_ordering(const BenchConfig& cfg, BenchOutcome& out) {
  Tools tools(cfg);
  for (auto mode : cfg.modes) {
    if (mode == Mode::copy_baseline) throw std::invalid_argument("ordering does not support copy-baseline");
    const auto label = "ordering." + std::string(to_string(mode));
    log::info("running ", label, " with ", cfg.runs, " runs");
    TempDir dir(cfg.keep_temp);
    const auto coord = coordination_of(mode);
    const auto period = cfg.period;
    const auto drain = std::max<Nanos>(std::chrono::milliseconds(500), cfg.inject_latency + cfg.latency_skew +
                                                                           cfg.stp_offset + 10 * period);
    const auto timeout = cfg.runs * period + drain;

    Topology topo;
    topo.federates = {"sub", "pubA", "pubB"};
    topo.connections = {Link{"pubA", "out", "sub", "inA", Delay::none()},
                        Link{"pubB", "out", "sub", "inB", Delay::none()}};
    RtiDaemon rti(tools, dir, topo, coord, timeout);
    const auto topo_path = dir.file("topology.json");

    auto sub = base_worker("sub", "ordering-subscriber", coord, topo_path);
    sub["period_ns"] = period.count();
    sub["stp_ns"] = cfg.stp_offset.count();
    sub["inject_latency_ns"] = cfg.inject_latency.count();
    if (cfg.latency_skew.count() > 0) sub["skew"] = {{"pubA", cfg.latency_skew.count()}};
    std::vector<json> configs{sub};
    for (int k = 0; k < 2; ++k) {
      auto p = base_worker(k == 0 ? "pubA" : "pubB", "ordering-publisher", coord, topo_path);
      p["period_ns"] = period.count();
      p["offset_ns"] = k * (period.count() / 2);
      p["count"] = cfg.runs;
      p["seq_base"] = k;
      p["seq_stride"] = 2;
      configs.push_back(p);
    }
    auto results = run_workers(tools, dir, configs, rti, kStartupOffset + timeout + cfg.stp_offset);
    const auto& r = results.at(0);
    const auto delivered = r.at("delivered").get<std::uint64_t>();
    const auto misordered = r.at("out_of_order").get<std::uint64_t>();
    const auto mismatched = r.at("tag_mismatch").get<std::uint64_t>();
    const auto violations = r.at("stp_violations").get<std::uint64_t>();
    const auto sent = 2 * static_cast<std::uint64_t>(cfg.runs);
    out.metrics[label + ".sent"] = static_cast<double>(sent);
    out.metrics[label + ".delivered"] = static_cast<double>(delivered);
    out.metrics[label + ".out_of_order"] = static_cast<double>(misordered);
    out.metrics[label + ".tag_mismatch"] = static_cast<double>(mismatched);
    out.metrics[label + ".stp_violations"] = static_cast<double>(violations);
    out.metrics[label + ".stp_handled"] = static_cast<double>(r.at("stp_handled").get<std::uint64_t>());
    out.metrics[label + ".stp_dropped"] = static_cast<double>(r.at("stp_dropped").get<std::uint64_t>());
    // Silent misordering: a message processed after a later-tagged one
    // without the runtime flagging it.
    out.metrics[label + ".silent_misordering"] = static_cast<double>(misordered);

    int iter = 0;
    for (const auto& lag : r.at("lags")) {
      out.records.push_back(LatencyRecord{"ordering", std::string(to_string(mode)), 0, iter++, lag.get<std::int64_t>()});
    }
    std::ostringstream d;
    d << delivered << " delivered of " << sent << ", " << misordered << " out of order, " << mismatched
      << " tag mismatches, " << violations << " detected violations";
    if (mode == Mode::centralized) {
      add_check(out, "stress correctness " + label,
                misordered == 0 && mismatched == 0 && violations == 0 && delivered == sent, d.str());
    } else {
      add_check(out, "no silent misordering " + label,
                misordered == 0 && mismatched == 0 && delivered + violations == sent, d.str());
    }
  }
}

// ---------------------------------------------------------------------------
// Coalescing A/B.

void run_ping(const BenchConfig& cfg, BenchOutcome& out) {
  Tools tools(cfg);
  std::map<bool, std::int64_t> medians;
  for (bool nodelay : cfg.nodelay_arms) {
    const std::string arm = nodelay ? "nodelay" : "coalescing";
    log::info("running ping ", arm, " with ", cfg.ping_count, " pings");
    TempDir dir(cfg.keep_temp);
    const auto addr_path = dir.file("echo.addr");
    const auto cfg_path = dir.file("echo.json");
    write_json_file({{"id", "echo"}, {"role", "echo"}, {"nodelay", nodelay}, {"address_file", addr_path}}, cfg_path);
    auto echo = ChildProcess::spawn({tools.bench, "worker", cfg_path});
    const auto addr = wait_for_file(addr_path, echo, kReadyTimeout);
    ConnectionOptions opts;
    opts.disable_coalescing = nodelay;
    std::vector<Nanos> rtts;
    {
      auto conn = connect(Endpoint::parse(addr), opts);
      rtts = ping_rtt(conn, static_cast<std::size_t>(cfg.ping_count));
    }
    if (auto st = echo.wait_for(std::chrono::seconds(5)); !st || *st != 0) {
      echo.terminate();
      throw Error(Errc::io, "echo worker did not exit cleanly");
    }
    std::vector<std::int64_t> v;
    int iter = 0;
    for (auto r : rtts) {
      v.push_back(r.count());
      out.records.push_back(LatencyRecord{"ping", arm, kPingBodyBytes, iter++, r.count()});
    }
    medians[nodelay] = percentile(v, 0.5);
    out.metrics["ping." + arm + ".median_ns"] = static_cast<double>(medians[nodelay]);
  }
  if (medians.count(true) && medians.count(false)) {
    std::ostringstream d;
    d << "median RTT " << medians[true] / 1e3 << " us without coalescing vs " << medians[false] / 1e3 << " us with it";
    add_check(out, "coalescing A/B", medians[true] < medians[false], d.str());
  }
}

// ---------------------------------------------------------------------------
// Serialization throughput (in process).

TypedArray float_array(std::uint64_t size_bytes) {
  std::vector<double> v(std::max<std::uint64_t>(size_bytes / 8, 1));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i) * 0.5;
  return TypedArray::from_vector(std::move(v));
}

void run_serde(const BenchConfig& cfg, BenchOutcome& out) {
  for (auto size : cfg.sizes_bytes) {
    const Value value(float_array(size));
    const std::uint64_t bytes = value.as<TypedArray>().byte_size();
    std::map<std::string, std::vector<std::int64_t>> samples;
    for (const auto& [name, opts] : {std::pair{std::string("in-band"), SerdeOptions::force_in_band()},
                                     std::pair{std::string("out-of-band"), SerdeOptions::force_out_of_band()}}) {
      for (int i = 0; i < cfg.total_iterations(); ++i) {
        const auto t0 = monotonic_now();
        auto payload = serialize(value, opts);
        const auto t1 = monotonic_now();
        auto back = deserialize(payload);
        const auto t2 = monotonic_now();
        if (back.as<TypedArray>().byte_size() != bytes) throw Error(Errc::malformed, "serde round trip lost data");
        if (i < cfg.warmup) continue;
        samples[name + "-serialize"].push_back(std::max<std::int64_t>(t1 - t0, 1));
        samples[name + "-deserialize"].push_back(std::max<std::int64_t>(t2 - t1, 1));
      }
    }
    for (const auto& [mode, v] : samples) {
      int iter = 0;
      for (auto x : v) out.records.push_back(LatencyRecord{"serde", mode, bytes, iter++, x});
    }
    const auto mb = static_cast<double>(bytes) / static_cast<double>(kMegabyte);
    auto tput = [&](const std::string& key) { return mb / (static_cast<double>(percentile(samples[key], 0.5)) / 1e9); };
    const auto label = size_label(size);
    const double ser_ratio = tput("out-of-band-serialize") / tput("in-band-serialize");
    const double de_ratio = tput("out-of-band-deserialize") / tput("in-band-deserialize");
    for (const auto* k : {"in-band-serialize", "in-band-deserialize", "out-of-band-serialize", "out-of-band-deserialize"}) {
      out.metrics["serde." + label + "." + k + ".mb_per_s"] = tput(k);
    }
    out.metrics["serde." + label + ".serialize_ratio"] = ser_ratio;
    out.metrics["serde." + label + ".deserialize_ratio"] = de_ratio;
  }
}

// ---------------------------------------------------------------------------
// Store write delay against a serialize-and-copy baseline.

/// What a conventional copy path pays to hand a payload to another process:
/// an in-band serialization into a fresh buffer, a fresh shared segment, and
/// a copy into it.
std::int64_t baseline_write(const Value& value, int n) {
  const auto t0 = monotonic_now();
  auto payload = serialize(value, SerdeOptions::force_in_band());
  auto wire = encode_inline(payload);
  const std::string name = "/hprm-bench-copy-" + std::to_string(::getpid()) + "-" + std::to_string(n);
  const int fd = ::shm_open(name.c_str(), O_CREAT | O_EXCL | O_RDWR, 0600);
  if (fd < 0) throw Error(Errc::io, "shm_open failed: " + std::string(std::strerror(errno)));
  if (::ftruncate(fd, static_cast<off_t>(wire.size())) != 0) {
    ::close(fd);
    ::shm_unlink(name.c_str());
    throw Error(Errc::io, "ftruncate failed");
  }
  void* p = ::mmap(nullptr, wire.size(), PROT_READ | PROT_WRITE, MAP_SHARED, fd, 0);
  ::close(fd);
  if (p == MAP_FAILED) {
    ::shm_unlink(name.c_str());
    throw Error(Errc::io, "mmap failed");
  }
  std::memcpy(p, wire.data(), wire.size());
  const auto t1 = monotonic_now();
  ::munmap(p, wire.size());
  ::shm_unlink(name.c_str());
  return t1 - t0;
}

void run_store(const BenchConfig& cfg, BenchOutcome& out) {
  Tools tools(cfg);
  TempDir dir(cfg.keep_temp);
  StoreDaemon store(tools, dir, store_capacity_for(cfg));
  for (auto size : cfg.sizes_bytes) {
    const Value value(float_array(size));
    const std::uint64_t bytes = value.as<TypedArray>().byte_size();
    std::vector<std::int64_t> zc, base;
    for (int i = 0; i < cfg.total_iterations(); ++i) {
      const auto t0 = monotonic_now();
      auto payload = serialize(value);
      store.client->put(payload);
      const auto t1 = monotonic_now();
      const auto b = baseline_write(value, i);
      if (i < cfg.warmup) continue;
      zc.push_back(t1 - t0);
      base.push_back(b);
    }
    int iter = 0;
    for (auto v : zc) out.records.push_back(LatencyRecord{"store", "store", bytes, iter++, v});
    iter = 0;
    for (auto v : base) out.records.push_back(LatencyRecord{"store", "copy-baseline", bytes, iter++, v});
    const auto mean = [](const std::vector<std::int64_t>& v) {
      return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    const auto label = size_label(size);
    out.metrics["store." + label + ".write_mean_ns"] = mean(zc);
    out.metrics["store." + label + ".baseline_mean_ns"] = mean(base);
    out.metrics["store." + label + ".ratio"] = mean(zc) / mean(base);
    if (size >= 10 * kMegabyte) {
      std::ostringstream d;
      d << "store write " << mean(zc) / 1e6 << " ms vs serialize-and-copy " << mean(base) / 1e6 << " ms";
      add_check(out, "store write scaling " + label, mean(zc) <= 0.5 * mean(base), d.str());
    }
  }
}

}  // namespace

BenchOutcome run(const BenchConfig& cfg) {
  cfg.validate();
  BenchOutcome out;
  switch (cfg.scenario) {
    case Scenario::broadcast:
    case Scenario::gather: run_fanout(cfg, out); break;
    case Scenario::ordering: run_ordering(cfg, out); break;
    case Scenario::ping: run_ping(cfg, out); break;
    case Scenario::serde: run_serde(cfg, out); break;
    case Scenario::store: run_store(cfg, out); break;
  }
  return out;
}

}  // namespace hprm::bench

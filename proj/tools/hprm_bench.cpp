// hprm-bench: multi-process latency benchmarks and ordering stress tests.

#include "hprm/bench.hpp"
#include "hprm/log.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <iostream>

namespace {

std::vector<std::uint64_t> parse_sizes(const std::vector<double>& mb) {
  std::vector<std::uint64_t> out;
  for (double v : mb) {
    if (!(v > 0)) throw CLI::ValidationError("--sizes-mb", "sizes must be positive");
    out.push_back(static_cast<std::uint64_t>(std::llround(v * static_cast<double>(hprm::bench::kMegabyte))));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc >= 2 && std::string_view(argv[1]) == "worker") {
    if (argc != 3) {
      std::cerr << "usage: hprm-bench worker <config.json>\n";
      return 2;
    }
    return hprm::bench::worker_main(argv[2]);
  }

  CLI::App app{"Latency benchmarks and ordering stress tests for hprm"};
  app.require_subcommand(1);
  std::string scenario_name = "broadcast";
  std::vector<double> sizes_mb{1, 5, 10, 25, 50};
  std::vector<std::string> mode_names{"centralized"};
  std::size_t nodes = 4;
  int iters = 100, warmup = 10, runs = 10000, count = 1000;
  long long stp_ns = 0, period_ns = 1'000'000, inject_ns = 0, skew_ns = 0, iter_period_ns = 0;
  std::uint64_t capacity = 0;
  std::string out = "results.csv", summary, bin_dir;
  bool keep_temp = false, coalescing_only = false, nodelay_only = false, verbose = false;

  for (const char* name : {"broadcast", "gather", "serde", "ordering", "ping", "store"}) {
    auto* sub = app.add_subcommand(name, std::string("Run the ") + name + " scenario");
    sub->add_option("--nodes", nodes, "Federates per broadcast/gather group")->check(CLI::Range(2, 64));
    sub->add_option("--sizes-mb", sizes_mb, "Payload sizes in MiB")->delimiter(',');
    sub->add_option("--mode", mode_names, "centralized, decentralized and/or copy-baseline")->delimiter(',');
    sub->add_option("--iters", iters, "Measured iterations per group");
    sub->add_option("--warmup", warmup, "Extra leading iterations left out of the results");
    sub->add_option("--stp-ns", stp_ns, "Safe-to-process offset for subscribers (decentralized)");
    sub->add_option("--out", out, "CSV output path");
    sub->add_option("--runs", runs, "Ordering: messages per publisher");
    sub->add_option("--period-ns", period_ns, "Ordering: publish period");
    sub->add_option("--inject-latency-ns", inject_ns, "Ordering: latency added to every delivery");
    sub->add_option("--latency-skew-ns", skew_ns, "Ordering: extra latency on the first publisher's link");
    sub->add_option("--iteration-period-ns", iter_period_ns, "Broadcast/gather: time between publishes");
    sub->add_option("--count", count, "Ping: round trips per arm");
    sub->add_flag("--coalescing-only", coalescing_only, "Ping: run only the coalescing-enabled arm");
    sub->add_flag("--nodelay-only", nodelay_only, "Ping: run only the coalescing-disabled arm");
    sub->add_option("--capacity-bytes", capacity, "Store capacity (default max(256 MiB, 8x largest size))");
    sub->add_option("--summary-json", summary, "Also write groups, metrics and checks as JSON");
    sub->add_option("--bin-dir", bin_dir, "Directory holding hprm-rti and hprm-store");
    sub->add_flag("--keep-temp", keep_temp, "Keep per-group configs and results");
    sub->add_flag("-v,--verbose", verbose, "Log progress");
    sub->final_callback([&scenario_name, sub] { scenario_name = sub->get_name(); });
  }
  CLI11_PARSE(app, argc, argv);

  hprm::log::init_from_env();
  if (verbose) hprm::log::set_level(hprm::log::Level::info);
  try {
    hprm::bench::BenchConfig cfg;
    cfg.scenario = hprm::bench::parse_scenario(scenario_name);
    cfg.nodes = nodes;
    cfg.sizes_bytes = parse_sizes(sizes_mb);
    cfg.modes.clear();
    for (const auto& m : mode_names) cfg.modes.push_back(hprm::bench::parse_mode(m));
    cfg.iterations = iters;
    cfg.warmup = warmup;
    cfg.stp_offset = hprm::Nanos{stp_ns};
    cfg.out = out;
    cfg.runs = runs;
    cfg.period = hprm::Nanos{period_ns};
    cfg.inject_latency = hprm::Nanos{inject_ns};
    cfg.latency_skew = hprm::Nanos{skew_ns};
    if (iter_period_ns > 0) cfg.iteration_period = hprm::Nanos{iter_period_ns};
    cfg.ping_count = count;
    if (coalescing_only && nodelay_only) throw std::invalid_argument("choose at most one ping arm flag");
    if (coalescing_only) cfg.nodelay_arms = {false};
    if (nodelay_only) cfg.nodelay_arms = {true};
    cfg.store_capacity = capacity;
    cfg.bin_dir = bin_dir;
    cfg.summary_json = summary;
    cfg.keep_temp = keep_temp;

    auto outcome = hprm::bench::run(cfg);
    if (!outcome.records.empty()) hprm::bench::emit_report(outcome.records, cfg.out);
    if (!cfg.summary_json.empty()) hprm::bench::write_summary_json(outcome, cfg.summary_json);
    for (const auto& g : outcome.records.empty() ? std::vector<hprm::bench::GroupSummary>{}
                                                 : hprm::bench::summarize(outcome.records)) {
      std::cout << g.scenario << " " << g.mode << " " << g.size_bytes << " B: n=" << g.count << " mean "
                << g.mean_ns / 1e6 << " ms, median " << g.median_ns / 1e6 << " ms, p99 " << g.p99_ns / 1e6
                << " ms\n";
    }
    for (const auto& [k, v] : outcome.metrics) std::cout << k << " = " << v << "\n";
    for (const auto& c : outcome.checks) std::cout << (c.passed ? "ok   " : "FAIL ") << c.name << ": " << c.detail << "\n";
    return outcome.ok() ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "hprm-bench: " << e.what() << "\n";
    return 2;
  }
}

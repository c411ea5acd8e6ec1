#pragma once

#include "hprm/tag.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hprm::bench {

enum class Scenario { broadcast, gather, serde, ordering, ping, store };
enum class Mode { centralized, decentralized, copy_baseline };

std::string_view to_string(Scenario s) noexcept;
std::string_view to_string(Mode m) noexcept;
Scenario parse_scenario(std::string_view text);
Mode parse_mode(std::string_view text);

/// 1 MB here is 2^20 bytes.
inline constexpr std::uint64_t kMegabyte = std::uint64_t{1} << 20;

struct BenchConfig {
  Scenario scenario = Scenario::broadcast;
  std::size_t nodes = 4;
  std::vector<std::uint64_t> sizes_bytes{1 * kMegabyte, 5 * kMegabyte, 10 * kMegabyte, 25 * kMegabyte,
                                         50 * kMegabyte};
  std::vector<Mode> modes{Mode::centralized};
  /// Measured iterations per group; warmup iterations run first on top.
  int iterations = 100;
  int warmup = 10;
  Nanos stp_offset{0};
  std::string out = "results.csv";

  // ordering
  int runs = 10000;
  Nanos period = std::chrono::milliseconds(1);
  Nanos inject_latency{0};
  /// Added to the first publisher's link only.
  Nanos latency_skew{0};

  // ping: which arms to run (true = coalescing disabled)
  std::vector<bool> nodelay_arms{true, false};
  int ping_count = 1000;

  /// Time between publishes in broadcast/gather; default 20 ms + 10 ms/MB.
  std::optional<Nanos> iteration_period;
  /// Store capacity; 0 picks max(256 MB, 8x the largest size).
  std::uint64_t store_capacity = 0;
  /// Where hprm-rti and hprm-store live; defaults to this executable's dir.
  std::string bin_dir;
  /// Optional machine-readable summary (groups, metrics, checks).
  std::string summary_json;
  bool keep_temp = false;

  /// Throws std::invalid_argument: nodes < 2, empty or zero sizes,
  /// iterations < 1, warmup < 0, runs < 1.
  void validate() const;
  [[nodiscard]] int total_iterations() const noexcept { return warmup + iterations; }
  [[nodiscard]] Nanos period_for(std::uint64_t size_bytes) const;
};

struct LatencyRecord {
  std::string scenario;
  std::string mode;
  std::uint64_t size_bytes = 0;
  int iter = 0;
  std::int64_t latency_ns = 0;

  bool operator==(const LatencyRecord&) const = default;
};

struct GroupSummary {
  std::string scenario;
  std::string mode;
  std::uint64_t size_bytes = 0;
  std::size_t count = 0;
  double mean_ns = 0;
  std::int64_t median_ns = 0;
  std::int64_t p99_ns = 0;
};

/// Nearest-rank percentile (q in (0, 1]) of unsorted samples.
std::int64_t percentile(std::vector<std::int64_t> samples, double q);

/// One summary per (scenario, mode, size) group, in order of first
/// appearance.
std::vector<GroupSummary> summarize(const std::vector<LatencyRecord>& records);

/// CSV text: header scenario,mode,size_bytes,iter,latency_ns, one row per
/// record, then a blank line and a summary block. Throws
/// Error(precondition) when `records` is empty.
std::string format_report(const std::vector<LatencyRecord>& records);
/// Writes format_report() to `path`; Error(io) when unwritable.
void emit_report(const std::vector<LatencyRecord>& records, const std::string& path);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct BenchOutcome {
  std::vector<LatencyRecord> records;
  std::vector<CheckResult> checks;
  /// Named scalar results (error counts, throughput ratios, ...).
  std::map<std::string, double> metrics;

  [[nodiscard]] bool ok() const noexcept;
};

/// Runs one scenario end to end, launching daemons and worker processes as
/// needed.
BenchOutcome run(const BenchConfig& cfg);

/// Writes the outcome as JSON.
void write_summary_json(const BenchOutcome& outcome, const std::string& path);

/// Entry point for `hprm-bench worker <config.json>`: runs one federate (or
/// echo server) described by the file and writes its results JSON.
int worker_main(const std::string& config_path);

}  // namespace hprm::bench

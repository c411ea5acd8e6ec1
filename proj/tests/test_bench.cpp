#include "hprm/bench.hpp"
#include "hprm/error.hpp"
#include "support.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace hprm;
using namespace hprm::bench;
using test::errc_of;

namespace {

BenchConfig tool_config(Scenario s) {
  BenchConfig c;
  c.scenario = s;
  c.bin_dir = HPRM_TOOL_DIR;
  return c;
}

const CheckResult* find_check(const BenchOutcome& o, const std::string& prefix) {
  for (const auto& c : o.checks) {
    if (c.name.rfind(prefix, 0) == 0) return &c;
  }
  return nullptr;
}

}  // namespace

TEST(Percentile, NearestRank) {
  std::vector<std::int64_t> v{15, 20, 35, 40, 50};
  EXPECT_EQ(percentile(v, 0.05), 15);
  EXPECT_EQ(percentile(v, 0.3), 20);
  EXPECT_EQ(percentile(v, 0.4), 20);
  EXPECT_EQ(percentile(v, 0.5), 35);
  EXPECT_EQ(percentile(v, 1.0), 50);
  EXPECT_EQ(percentile({7}, 0.99), 7);
  EXPECT_EQ(errc_of([] { percentile({}, 0.5); }), Errc::precondition);
  EXPECT_THROW(percentile(v, 0.0), std::invalid_argument);
  EXPECT_THROW(percentile(v, 1.5), std::invalid_argument);
}

TEST(PercentileProperty, MatchesCountingDefinition) {
  // Oracle: the smallest sample x with at least ceil(q n) samples <= x.
  test::Rng rng;
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<std::int64_t> v(1 + rng.below(40));
    for (auto& x : v) x = rng.range(-20, 20);
    const double q = static_cast<double>(1 + rng.below(100)) / 100.0;
    const auto need = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
    std::int64_t expected = INT64_MAX;
    for (auto x : v) {
      const auto at_most = static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [&](auto y) { return y <= x; }));
      if (at_most >= need) expected = std::min(expected, x);
    }
    ASSERT_EQ(percentile(v, q), expected);
  }
}

TEST(Report, FormatsRowsAndSummary) {
  std::vector<LatencyRecord> rs{{"broadcast", "centralized", 1048576, 0, 100},
                                {"broadcast", "centralized", 1048576, 1, 300},
                                {"broadcast", "decentralized", 1048576, 0, 50}};
  const auto text = format_report(rs);
  EXPECT_EQ(text,
            "scenario,mode,size_bytes,iter,latency_ns\n"
            "broadcast,centralized,1048576,0,100\n"
            "broadcast,centralized,1048576,1,300\n"
            "broadcast,decentralized,1048576,0,50\n"
            "\n# summary\n"
            "scenario,mode,size_bytes,count,mean_ns,median_ns,p99_ns\n"
            "broadcast,centralized,1048576,2,200.000,100,300\n"
            "broadcast,decentralized,1048576,1,50.000,50,50\n");
  EXPECT_EQ(errc_of([] { format_report({}); }), Errc::precondition);
}

TEST(Report, IsDeterministicAndWritable) {
  std::vector<LatencyRecord> rs;
  test::Rng rng;
  for (int i = 0; i < 200; ++i) rs.push_back({"gather", "copy-baseline", 5u << 20, i, rng.range(1, 1000000)});
  EXPECT_EQ(format_report(rs), format_report(rs));
  const auto path = test::temp_path("report.csv");
  emit_report(rs, path);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), format_report(rs));
  std::filesystem::remove(path);
  EXPECT_EQ(errc_of([&] { emit_report(rs, "/nonexistent-dir/report.csv"); }), Errc::io);
}

TEST(BenchConfig, Validation) {
  BenchConfig c;
  EXPECT_NO_THROW(c.validate());
  auto bad = [](auto mutate) {
    BenchConfig b;
    mutate(b);
    return b;
  };
  EXPECT_THROW(bad([](BenchConfig& b) { b.nodes = 1; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](BenchConfig& b) { b.sizes_bytes.clear(); }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](BenchConfig& b) { b.sizes_bytes = {0}; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](BenchConfig& b) { b.iterations = 0; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](BenchConfig& b) { b.warmup = -1; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](BenchConfig& b) { b.runs = 0; }).validate(), std::invalid_argument);
  EXPECT_THROW(parse_scenario("nope"), std::invalid_argument);
  EXPECT_EQ(parse_mode("copy-baseline"), Mode::copy_baseline);
  EXPECT_EQ(to_string(Scenario::gather), "gather");
}

TEST(BenchConfig, PeriodGrowsWithPayload) {
  BenchConfig c;
  EXPECT_EQ(c.period_for(0), std::chrono::milliseconds(20));
  EXPECT_EQ(c.period_for(10 * kMegabyte), std::chrono::milliseconds(120));
  c.iteration_period = std::chrono::milliseconds(7);
  EXPECT_EQ(c.period_for(50 * kMegabyte), std::chrono::milliseconds(7));
}

TEST(BenchRun, MissingToolsAreAnIoError) {
  auto c = tool_config(Scenario::broadcast);
  c.bin_dir = "/nonexistent";
  c.iterations = 2;
  c.warmup = 0;
  EXPECT_EQ(errc_of([&] { run(c); }), Errc::io);
}

TEST(BenchRun, SerdeScenarioReportsRatios) {
  auto c = tool_config(Scenario::serde);
  c.sizes_bytes = {kMegabyte};
  c.iterations = 4;
  c.warmup = 1;
  const auto o = run(c);
  EXPECT_EQ(o.records.size(), 16u);
  EXPECT_GT(o.metrics.at("serde.1MB.serialize_ratio"), 1.0);
  EXPECT_GT(o.metrics.at("serde.1MB.deserialize_ratio"), 1.0);
}

TEST(BenchRun, SmallBroadcastEndToEnd) {
  auto c = tool_config(Scenario::broadcast);
  c.nodes = 3;
  c.sizes_bytes = {256 << 10};
  c.iterations = 3;
  c.warmup = 1;
  const auto o = run(c);
  ASSERT_EQ(o.records.size(), 3u);
  for (const auto& r : o.records) {
    EXPECT_EQ(r.scenario, "broadcast");
    EXPECT_GT(r.latency_ns, 0);
  }
  const auto* delivery = find_check(o, "delivery broadcast.centralized");
  ASSERT_NE(delivery, nullptr);
  EXPECT_TRUE(delivery->passed) << delivery->detail;
  const auto* zc = find_check(o, "zero-copy");
  ASSERT_NE(zc, nullptr);
  EXPECT_TRUE(zc->passed) << zc->detail;
  EXPECT_EQ(o.metrics.at("store_publishes.broadcast.centralized.262144B"), 4.0);

  const auto path = test::temp_path("summary.json");
  write_summary_json(o, path);
  std::ifstream in(path);
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j.at("ok").get<bool>(), o.ok());
  EXPECT_EQ(j.at("checks").size(), o.checks.size());
  std::filesystem::remove(path);
}

TEST(BenchRun, CentralizedOrderingHasNoErrors) {
  auto c = tool_config(Scenario::ordering);
  c.runs = 30;
  c.period = std::chrono::milliseconds(2);
  const auto o = run(c);
  EXPECT_EQ(o.metrics.at("ordering.centralized.delivered"), 60.0);
  EXPECT_EQ(o.metrics.at("ordering.centralized.out_of_order"), 0.0);
  EXPECT_EQ(o.metrics.at("ordering.centralized.tag_mismatch"), 0.0);
  EXPECT_TRUE(o.ok());
}

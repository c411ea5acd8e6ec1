#include "hprm/error.hpp"
#include "hprm/store_client.hpp"
#include "hprm/store_server.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <thread>

using namespace hprm;
using namespace std::chrono_literals;
using test::errc_of;

namespace {

class StoreDaemon : public ::testing::Test {
 protected:
  void SetUp() override {
    StoreServerOptions opts;
    opts.socket_path = test::temp_path("store.sock");
    opts.store.capacity_bytes = 64ull << 20;
    server_ = std::make_unique<StoreServer>(opts);
    thread_ = std::thread([this] { server_->run(); });
  }
  void TearDown() override {
    server_->stop();
    thread_.join();
  }

  std::shared_ptr<StoreClient> client() { return StoreClient::connect(server_->socket_path()); }

  std::unique_ptr<StoreServer> server_;
  std::thread thread_;
};

std::vector<std::byte> pattern(std::size_t n, std::uint64_t seed) {
  test::Rng rng(seed);
  std::vector<std::byte> out(n);
  for (auto& b : out) b = static_cast<std::byte>(rng.below(256));
  return out;
}

}  // namespace

TEST_F(StoreDaemon, BytesSurviveTheRoundTrip) {
  auto producer = client();
  auto consumer = client();
  const auto id = ObjectId::random();
  const auto data = pattern(3 << 20, 11);
  auto region = producer->create(id, data.size());
  ASSERT_EQ(region.size(), data.size());
  std::memcpy(region.data(), data.data(), data.size());
  producer->seal(id);
  auto view = consumer->get(id, 1s);
  EXPECT_EQ(test::fnv1a(view), test::fnv1a(data));
  consumer->release(id);
}

TEST_F(StoreDaemon, ConcurrentGetsCountReferences) {
  auto producer = client();
  const auto id = ObjectId::random();
  producer->create(id, 4096);
  producer->seal(id);
  std::vector<std::shared_ptr<StoreClient>> readers{client(), client(), client()};
  std::vector<std::thread> ts;
  for (auto& r : readers) ts.emplace_back([&] { r->get(id, 1s); });
  for (auto& t : ts) t.join();
  EXPECT_EQ(producer->entry(id)->ref_count, 3u);
  readers[0]->release(id);
  EXPECT_EQ(producer->entry(id)->ref_count, 2u);
  EXPECT_EQ(errc_of([&] { readers[0]->release(id); }), Errc::no_reference);
}

TEST_F(StoreDaemon, GetWaitsForSeal) {
  auto producer = client();
  auto consumer = client();
  const auto id = ObjectId::random();
  producer->create(id, 128);
  std::thread later([&] {
    std::this_thread::sleep_for(50ms);
    producer->seal(id);
  });
  const auto t0 = std::chrono::steady_clock::now();
  auto view = consumer->get(id, 2s);
  EXPECT_GE(std::chrono::steady_clock::now() - t0, 40ms);
  EXPECT_EQ(view.size(), 128u);
  later.join();
}

TEST_F(StoreDaemon, GetOfMissingObjectTimesOut) {
  auto c = client();
  EXPECT_EQ(errc_of([&] { c->get(ObjectId::random(), 30ms); }), Errc::timeout);
  // The daemon still answers afterwards.
  EXPECT_EQ(c->stats().entries, 0u);
}

TEST_F(StoreDaemon, ErrorsCrossTheSocket) {
  auto a = client();
  auto b = client();
  const auto id = ObjectId::random();
  a->create(id, 10);
  EXPECT_EQ(errc_of([&] { b->create(id, 10); }), Errc::duplicate_id);
  EXPECT_EQ(errc_of([&] { b->seal(id); }), Errc::precondition);
  a->seal(id);
  EXPECT_EQ(errc_of([&] { a->seal(id); }), Errc::already_sealed);
  EXPECT_EQ(errc_of([&] { a->create(ObjectId::random(), 65ull << 20); }), Errc::capacity_exceeded);
}

TEST_F(StoreDaemon, PutFetchIsZeroCopyAndReleasesOnDrop) {
  auto producer = client();
  auto consumer = client();
  std::vector<double> xs(1 << 18);
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = static_cast<double>(i) * 0.25;
  const Value v(TypedArray::from_vector(xs));
  const auto ref = producer->put(serialize(v));
  EXPECT_EQ(producer->entry(ref.id)->write_passes, 1u);
  {
    serde_counters() = {};
    auto payload = consumer->fetch(ref, 1s);
    auto back = deserialize(payload);
    EXPECT_EQ(back, v);
    EXPECT_LT(serde_counters().bytes_copied, 64u);
    EXPECT_EQ(producer->entry(ref.id)->ref_count, 1u);
  }
  EXPECT_EQ(producer->entry(ref.id)->ref_count, 0u);

  std::size_t creates = 0, gets = 0, releases = 0;
  for (const auto& r : producer->op_log()) {
    if (r.id != ref.id) continue;
    creates += r.op == StoreOp::create;
    gets += r.op == StoreOp::get;
    releases += r.op == StoreOp::release;
  }
  EXPECT_EQ(creates, 1u);
  EXPECT_EQ(gets, 1u);
  EXPECT_EQ(releases, 1u);
}

TEST_F(StoreDaemon, DisconnectDropsPinsAndAbortsCreates) {
  auto producer = client();
  const auto sealed = ObjectId::random();
  const auto pending = ObjectId::random();
  producer->create(sealed, 100);
  producer->seal(sealed);
  {
    auto transient = client();
    transient->get(sealed, 1s);
    transient->create(pending, 100);
  }
  // The daemon notices the closed socket on its next loop iteration.
  for (int i = 0; i < 100 && producer->entry(pending); ++i) std::this_thread::sleep_for(5ms);
  EXPECT_FALSE(producer->entry(pending).has_value());
  EXPECT_EQ(producer->entry(sealed)->ref_count, 0u);
}

TEST_F(StoreDaemon, EvictionOverTheSocket) {
  auto c = client();
  std::vector<ObjectId> ids;
  for (int i = 0; i < 4; ++i) {
    ids.push_back(ObjectId::random());
    c->create(ids.back(), 1 << 20);
    c->seal(ids.back());
  }
  auto evicted = c->evict(1);
  ASSERT_FALSE(evicted.empty());
  EXPECT_EQ(evicted.front(), ids.front());
  EXPECT_EQ(c->stats().counters.eviction_passes, 1u);
}

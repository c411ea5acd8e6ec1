#include "hprm/error.hpp"
#include "hprm/object_store.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <map>
#include <set>

using namespace hprm;
using test::errc_of;

namespace {

ObjectId id_of(std::uint8_t n) {
  ObjectId id;
  id.bytes[0] = n;
  id.bytes[19] = 0xEE;
  return id;
}

StoreCore small_store(std::uint64_t capacity = 1000, double fraction = 0.2) {
  return StoreCore(StoreConfig{capacity, fraction});
}

void put_sealed(StoreCore& s, ClientId c, const ObjectId& id, std::uint64_t size) {
  s.create(c, id, size);
  s.seal(c, id);
}

}  // namespace

TEST(ObjectId, HexRoundTrip) {
  auto id = ObjectId::random();
  EXPECT_EQ(id.hex().size(), 40u);
  EXPECT_EQ(ObjectId::from_hex(id.hex()), id);
  EXPECT_NE(ObjectId::random(), id);
  EXPECT_THROW(ObjectId::from_hex("abc"), std::invalid_argument);
}

TEST(ObjectRef, EncodeDecodeAndValidity) {
  ObjectRef r{id_of(1), 300, Extent{5, 20}, {Extent{64, 100}, Extent{192, 108}}};
  EXPECT_TRUE(r.valid());
  EXPECT_EQ(ObjectRef::decode(r.encode()), r);
  auto overlap = r;
  overlap.segments[1].offset = 150;
  EXPECT_FALSE(overlap.valid());
  EXPECT_EQ(errc_of([&] { ObjectRef::decode(overlap.encode()); }), Errc::malformed);
  auto beyond = r;
  beyond.segments[1].length = 109;
  EXPECT_FALSE(beyond.valid());
  auto body = r.encode();
  body.pop_back();
  EXPECT_EQ(errc_of([&] { ObjectRef::decode(body); }), Errc::malformed);
}

TEST(ObjectLayout, SegmentsAlignedAndViewAliasesObject) {
  std::vector<double> xs(1000, 1.5);
  std::vector<std::uint8_t> ys(5000, 9);
  Value::Map m;
  m.emplace("a", Value(TypedArray::from_vector(xs)));
  m.emplace("b", Value(TypedArray::from_vector(ys)));
  const Value v(std::move(m));
  const auto p = serialize(v);
  const auto ref = plan_layout(p, id_of(2));
  ASSERT_EQ(ref.segments.size(), 2u);
  for (const auto& s : ref.segments) EXPECT_EQ(s.offset % kSegmentAlignment, 0u);
  EXPECT_TRUE(ref.valid());

  std::vector<std::byte> object(ref.total_length, std::byte{0xFF});
  write_layout(p, ref, object);
  auto buf = Buffer::borrow(object);
  auto back = view_layout(ref, buf);
  EXPECT_EQ(back.segments[0].data(), object.data() + ref.segments[0].offset);
  EXPECT_EQ(deserialize(back), v);
  EXPECT_EQ(errc_of([&] { view_layout(ref, buf.slice(0, ref.total_length - 1)); }), Errc::truncated);
}

TEST(StoreCore, LifecycleAndLog) {
  auto s = small_store();
  const auto a = id_of(1);
  auto place = s.create(7, a, 100);
  EXPECT_EQ(place.offset % kSegmentAlignment, 0u);
  EXPECT_FALSE(s.try_get(8, a).has_value());
  s.seal(7, a);
  ASSERT_TRUE(s.try_get(8, a).has_value());
  ASSERT_TRUE(s.try_get(9, a).has_value());
  ASSERT_TRUE(s.try_get(9, a).has_value());
  EXPECT_EQ(s.entry(a)->ref_count, 3u);
  s.release(9, a);
  EXPECT_EQ(s.entry(a)->ref_count, 2u);
  s.disconnect(9);
  s.disconnect(8);
  EXPECT_EQ(s.entry(a)->ref_count, 0u);

  std::vector<StoreOp> ops;
  for (const auto& r : s.log()) ops.push_back(r.op);
  EXPECT_EQ(ops, (std::vector<StoreOp>{StoreOp::create, StoreOp::seal, StoreOp::get, StoreOp::get, StoreOp::get,
                                       StoreOp::release, StoreOp::release, StoreOp::release}));
  for (std::size_t i = 0; i < s.log().size(); ++i) EXPECT_EQ(s.log()[i].seq, i);
}

TEST(StoreCore, Errors) {
  auto s = small_store();
  const auto a = id_of(1);
  EXPECT_EQ(errc_of([&] { s.create(1, a, 0); }), Errc::precondition);
  EXPECT_EQ(errc_of([&] { s.create(1, a, 1001); }), Errc::capacity_exceeded);
  s.create(1, a, 10);
  EXPECT_EQ(errc_of([&] { s.create(2, a, 10); }), Errc::duplicate_id);
  EXPECT_EQ(errc_of([&] { s.seal(2, a); }), Errc::precondition);
  EXPECT_EQ(errc_of([&] { s.seal(1, id_of(9)); }), Errc::unknown_id);
  s.seal(1, a);
  EXPECT_EQ(errc_of([&] { s.seal(1, a); }), Errc::already_sealed);
  EXPECT_EQ(errc_of([&] { s.release(1, a); }), Errc::no_reference);
}

TEST(StoreCore, DisconnectAbortsUnsealedCreates) {
  auto s = small_store();
  s.create(4, id_of(1), 50);
  put_sealed(s, 4, id_of(2), 50);
  s.disconnect(4);
  EXPECT_FALSE(s.entry(id_of(1)).has_value());
  EXPECT_TRUE(s.entry(id_of(2)).has_value());
  EXPECT_EQ(s.log().back().op, StoreOp::abort);
  EXPECT_EQ(s.occupancy(), 50u);
}

TEST(StoreCore, EvictionFreesAtLeastTheConfiguredFraction) {
  auto s = small_store(1000, 0.5);
  for (std::uint8_t i = 0; i < 10; ++i) put_sealed(s, 1, id_of(i), 100);
  ASSERT_TRUE(s.try_get(2, id_of(0)).has_value());  // pinned and most recent
  auto evicted = s.evict(150);
  // 1..5 are the least recently used unpinned objects; 500 bytes is the floor.
  EXPECT_EQ(evicted, (std::vector<ObjectId>{id_of(1), id_of(2), id_of(3), id_of(4), id_of(5)}));
  EXPECT_EQ(s.occupancy(), 500u);
  EXPECT_EQ(s.counters().eviction_passes, 1u);
  EXPECT_EQ(s.counters().evicted_bytes, 500u);
}

TEST(StoreCore, EvictionRefusesWhenPinnedBytesBlockIt) {
  auto s = small_store();
  put_sealed(s, 1, id_of(1), 400);
  put_sealed(s, 1, id_of(2), 400);
  ASSERT_TRUE(s.try_get(2, id_of(1)).has_value());
  EXPECT_EQ(errc_of([&] { s.evict(500); }), Errc::store_full);
  EXPECT_EQ(s.entry_count(), 2u);
  EXPECT_EQ(errc_of([&] { s.create(3, id_of(3), 700); }), Errc::store_full);
  EXPECT_EQ(s.entry_count(), 2u);
}

TEST(StoreCore, CreateEvictsWhenShortOfSpace) {
  auto s = small_store(1000, 0.0);
  put_sealed(s, 1, id_of(1), 300);
  put_sealed(s, 1, id_of(2), 300);
  put_sealed(s, 1, id_of(3), 300);
  ASSERT_TRUE(s.try_get(1, id_of(1)).has_value());
  s.release(1, id_of(1));  // touching 1 makes 2 the oldest
  s.create(1, id_of(4), 200);
  EXPECT_FALSE(s.entry(id_of(2)).has_value());
  EXPECT_TRUE(s.entry(id_of(1)).has_value());
  EXPECT_EQ(s.occupancy(), 800u);
}

// Model-based check: a plain reference model of the store's bookkeeping
// runs the same random operation stream.
namespace {

struct ModelEntry {
  std::uint64_t size = 0;
  bool sealed = false;
  ClientId creator = 0;
  std::map<ClientId, std::uint32_t> pins;
  std::uint64_t last = 0;

  [[nodiscard]] std::uint32_t refs() const {
    std::uint32_t n = 0;
    for (const auto& [c, k] : pins) n += k;
    return n;
  }
};

class Model {
 public:
  std::map<ObjectId, ModelEntry> entries;
  std::uint64_t clock = 0;

  [[nodiscard]] std::vector<ObjectId> lru() const {
    std::vector<std::pair<std::uint64_t, ObjectId>> v;
    for (const auto& [id, e] : entries) {
      if (e.sealed && e.refs() == 0) v.emplace_back(e.last, id);
    }
    std::sort(v.begin(), v.end());
    std::vector<ObjectId> out;
    for (auto& [t, id] : v) out.push_back(id);
    return out;
  }
  [[nodiscard]] std::uint64_t occupancy() const {
    std::uint64_t n = 0;
    for (const auto& [id, e] : entries) n += e.size;
    return n;
  }
};

}  // namespace

TEST(ObjectStoreProperty, MatchesReferenceModel) {
  test::Rng rng;
  constexpr std::uint64_t kCapacity = 64 * 1024;
  for (int trial = 0; trial < 40; ++trial) {
    const double fraction = rng.below(4) * 0.1;
    StoreCore core(StoreConfig{kCapacity, fraction});
    Model model;
    std::uint32_t next_id = 0;

    for (int step = 0; step < 600; ++step) {
      const auto lru_before = model.lru();
      const auto op = rng.below(10);
      const ClientId client = 1 + rng.below(3);
      auto pick = [&]() -> std::optional<ObjectId> {
        if (model.entries.empty()) return std::nullopt;
        auto it = model.entries.begin();
        std::advance(it, rng.below(model.entries.size()));
        return it->first;
      };
      bool may_evict = false;

      if (op <= 3) {
        ObjectId id;
        const auto n = next_id++;
        std::memcpy(id.bytes.data(), &n, sizeof n);
        const auto size = 1 + rng.below(rng.chance(0.1) ? kCapacity : 8192);
        auto err = errc_of([&] { core.create(client, id, size); });
        may_evict = true;
        if (!err) {
          model.entries[id] = ModelEntry{size, false, client, {}, ++model.clock};
        } else {
          ASSERT_EQ(*err, Errc::store_full);
        }
      } else if (op == 4) {
        // Seal something still being created, by its creator.
        for (auto& [id, e] : model.entries) {
          if (!e.sealed) {
            core.seal(e.creator, id);
            e.sealed = true;
            e.last = ++model.clock;
            break;
          }
        }
      } else if (op <= 6) {
        if (auto id = pick()) {
          auto& e = model.entries[*id];
          auto got = core.try_get(client, *id);
          ASSERT_EQ(got.has_value(), e.sealed);
          if (got) {
            ++e.pins[client];
            e.last = ++model.clock;
          }
        }
      } else if (op == 7) {
        if (auto id = pick()) {
          auto& e = model.entries[*id];
          auto err = errc_of([&] { core.release(client, *id); });
          if (e.pins.count(client)) {
            ASSERT_FALSE(err);
            if (--e.pins[client] == 0) e.pins.erase(client);
          } else {
            ASSERT_EQ(err, Errc::no_reference);
          }
        }
      } else if (op == 8) {
        const auto need = rng.below(kCapacity / 2);
        std::uint64_t evictable = 0;
        for (const auto& id : lru_before) evictable += model.entries[id].size;
        std::vector<ObjectId> evicted;
        auto err = errc_of([&] { evicted = core.evict(need); });
        if (evictable < need) {
          ASSERT_EQ(err, Errc::store_full);
          ASSERT_TRUE(evicted.empty());
        } else {
          ASSERT_FALSE(err);
          // Oracle: walk the model's LRU order until the target is covered.
          const auto target = std::max<std::uint64_t>(need, static_cast<std::uint64_t>(fraction * kCapacity));
          std::vector<ObjectId> expected;
          std::uint64_t freed = 0;
          for (const auto& id : lru_before) {
            if (freed >= target) break;
            freed += model.entries[id].size;
            expected.push_back(id);
          }
          ASSERT_EQ(evicted, expected);
        }
        may_evict = true;
      } else {
        core.disconnect(client);
        for (auto it = model.entries.begin(); it != model.entries.end();) {
          it->second.pins.erase(client);
          if (!it->second.sealed && it->second.creator == client) {
            it = model.entries.erase(it);
          } else {
            ++it;
          }
        }
      }

      // Whatever vanished must be a prefix of the pre-step LRU order, so
      // pinned and unsealed entries are never evicted.
      std::vector<ObjectId> vanished;
      for (auto it = model.entries.begin(); it != model.entries.end();) {
        if (!core.entry(it->first)) {
          vanished.push_back(it->first);
          it = model.entries.erase(it);
        } else {
          ++it;
        }
      }
      if (!may_evict) {
        ASSERT_TRUE(vanished.empty()) << "step " << step;
      } else {
        std::set<ObjectId> gone(vanished.begin(), vanished.end());
        ASSERT_LE(gone.size(), lru_before.size());
        for (std::size_t i = 0; i < gone.size(); ++i) ASSERT_TRUE(gone.count(lru_before[i])) << "step " << step;
      }

      ASSERT_EQ(core.entry_count(), model.entries.size());
      ASSERT_EQ(core.occupancy(), model.occupancy());
      ASSERT_LE(core.occupancy(), kCapacity);
      for (const auto& [id, e] : model.entries) {
        auto got = core.entry(id);
        ASSERT_TRUE(got);
        ASSERT_EQ(got->ref_count, e.refs());
        ASSERT_EQ(got->state == EntryState::sealed, e.sealed);
        ASSERT_EQ(got->size, e.size);
      }
    }
  }
}

TEST(ObjectStoreProperty, LiveObjectsNeverOverlapInTheArena) {
  test::Rng rng;
  StoreCore core(StoreConfig{32 * 1024, 0.1});
  std::vector<ObjectId> live;
  for (std::uint32_t n = 0; n < 3000; ++n) {
    ObjectId id;
    std::memcpy(id.bytes.data(), &n, sizeof n);
    if (!errc_of([&] { put_sealed(core, 1, id, 1 + rng.below(6000)); })) live.push_back(id);
    std::vector<std::pair<std::uint64_t, std::uint64_t>> spans;
    for (const auto& x : live) {
      if (auto e = core.entry(x)) {
        ASSERT_EQ(e->offset % kSegmentAlignment, 0u);
        ASSERT_LE(e->offset + e->size, core.arena_size());
        spans.emplace_back(e->offset, e->offset + e->size);
      }
    }
    std::sort(spans.begin(), spans.end());
    for (std::size_t i = 1; i < spans.size(); ++i) ASSERT_LE(spans[i - 1].second, spans[i].first);
  }
}

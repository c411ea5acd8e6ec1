#include "hprm/error.hpp"
#include "hprm/scheduler.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace hprm;
using namespace std::chrono_literals;
using test::errc_of;

TEST(Scheduler, CentralizedGateNeedsGrantAboveTagAndClock) {
  Scheduler s(CoordinationMode::centralized, Nanos{0});
  s.push(Event{Tag{100, 0}, 1, nullptr});
  EXPECT_FALSE(s.may_execute(Tag{100, 0}, 1000));
  s.set_grant(Tag{100, 0});
  EXPECT_FALSE(s.may_execute(Tag{100, 0}, 1000));  // grant must be strictly above
  s.set_grant(Tag{100, 1});
  EXPECT_FALSE(s.may_execute(Tag{100, 0}, 99));
  EXPECT_TRUE(s.may_execute(Tag{100, 0}, 100));
  s.set_grant(Tag{50, 0});  // grants never move backwards
  EXPECT_EQ(s.grant(), (Tag{100, 1}));
  EXPECT_FALSE(s.may_execute(Tag::forever(), 1000));
}

TEST(Scheduler, DecentralizedGateWaitsForOffset) {
  Scheduler s(CoordinationMode::decentralized, 30ns);
  EXPECT_EQ(s.release_time(Tag{100, 0}), 130);
  EXPECT_FALSE(s.may_execute(Tag{100, 0}, 129));
  EXPECT_TRUE(s.may_execute(Tag{100, 0}, 130));
  Scheduler negative(CoordinationMode::decentralized, Nanos{-30});
  EXPECT_TRUE(negative.may_execute(Tag{100, 0}, 70));
  Scheduler huge(CoordinationMode::decentralized, Nanos{Tag::kMaxTime});
  EXPECT_EQ(huge.release_time(Tag{100, 0}), Tag::kMaxTime);
}

TEST(Scheduler, TakeReturnsEverythingAtTheHead) {
  Scheduler s(CoordinationMode::centralized, Nanos{0});
  s.push(Event{Tag{5, 0}, 1, nullptr});
  s.push(Event{Tag{5, 0}, 2, nullptr});
  s.push(Event{Tag{5, 1}, 3, nullptr});
  EXPECT_EQ(errc_of([&] { s.take(Tag{5, 1}); }), Errc::precondition);
  auto batch = s.take(Tag{5, 0});
  ASSERT_EQ(batch.size(), 2u);
  EXPECT_EQ(s.current(), (Tag{5, 0}));
  EXPECT_EQ(s.head(), (Tag{5, 1}));
  s.complete(Tag{5, 0});
  EXPECT_EQ(errc_of([&] { s.complete(Tag{5, 0}); }), Errc::ordering_fault);
}

TEST(Scheduler, LateArrivalsClassifiedByMode) {
  Scheduler c(CoordinationMode::centralized, Nanos{0});
  c.push(Event{Tag{5, 0}, 1, nullptr});
  c.take(Tag{5, 0});
  EXPECT_EQ(c.push(Event{Tag{5, 0}, 1, nullptr}), Admission::fault);
  EXPECT_EQ(c.push(Event{Tag{5, 1}, 1, nullptr}), Admission::queued);

  Scheduler d(CoordinationMode::decentralized, Nanos{0});
  d.push(Event{Tag{5, 0}, 1, nullptr});
  d.take(Tag{5, 0});
  d.complete(Tag{5, 0});
  EXPECT_EQ(d.push(Event{Tag{4, 0}, 1, nullptr}), Admission::late);
}

TEST(Scheduler, NetUpdateReportsOnlyChanges) {
  Scheduler s(CoordinationMode::centralized, Nanos{0});
  EXPECT_EQ(s.net_update(), Tag::forever());
  EXPECT_FALSE(s.net_update().has_value());
  s.push(Event{Tag{9, 0}, 1, nullptr});
  EXPECT_EQ(s.net_update(), (Tag{9, 0}));
  EXPECT_FALSE(s.net_update().has_value());
}

TEST(Scheduler, HaltNeedsEverythingUpToStopSettled) {
  Scheduler c(CoordinationMode::centralized, Nanos{0});
  c.push(Event{Tag{20, 0}, 1, nullptr});
  EXPECT_FALSE(c.may_halt(Tag{10, 0}, 100));
  c.set_grant(Tag{10, 1});
  EXPECT_TRUE(c.may_halt(Tag{10, 0}, 0));
  EXPECT_FALSE(c.may_halt(Tag{20, 0}, 100));

  Scheduler d(CoordinationMode::decentralized, 5ns);
  EXPECT_FALSE(d.may_halt(Tag{10, 0}, 14));
  EXPECT_TRUE(d.may_halt(Tag{10, 0}, 15));
}

TEST(SchedulerProperty, ExecutesEveryAdmittedEventInTagOrder) {
  test::Rng rng;
  for (int trial = 0; trial < 300; ++trial) {
    const auto mode = rng.chance(0.5) ? CoordinationMode::centralized : CoordinationMode::decentralized;
    Scheduler s(mode, Nanos{rng.range(-5, 5)});
    std::vector<std::pair<Tag, TriggerId>> admitted, executed;
    Tag last = Tag::never();
    TriggerId next = 0;
    for (int step = 0; step < 400; ++step) {
      if (rng.chance(0.55)) {
        const auto t = rng.tag();
        const auto id = next++;
        const auto a = s.push(Event{t, id, nullptr});
        // Oracle: admission depends only on whether t is past the current tag.
        const bool late = t <= s.current();
        ASSERT_EQ(a == Admission::queued, !late);
        if (late) {
          ASSERT_EQ(a, mode == CoordinationMode::centralized ? Admission::fault : Admission::late);
        } else {
          admitted.emplace_back(t, id);
        }
      } else if (!s.empty()) {
        const auto h = s.head();
        ASSERT_GT(h, last);
        for (auto& e : s.take(h)) executed.emplace_back(e.tag, e.trigger);
        s.complete(h);
        last = h;
      }
    }
    while (!s.empty()) {
      const auto h = s.head();
      for (auto& e : s.take(h)) executed.emplace_back(e.tag, e.trigger);
      s.complete(h);
    }
    // Nothing is lost or duplicated, and the whole stream is in tag order.
    ASSERT_TRUE(std::is_sorted(executed.begin(), executed.end(),
                               [](const auto& a, const auto& b) { return a.first < b.first; }));
    auto a = admitted, e = executed;
    std::sort(a.begin(), a.end());
    std::sort(e.begin(), e.end());
    ASSERT_EQ(a, e);
  }
}

#include "hprm/tag.hpp"
#include "hprm/topology.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <sstream>
#include <utility>

using namespace hprm;
using namespace std::chrono_literals;

namespace {

constexpr std::int64_t ms(std::int64_t v) { return v * 1'000'000; }

// Oracle ordering for finite tags: a plain lexicographic pair comparison.
std::pair<std::int64_t, std::uint32_t> key(const Tag& t) { return {t.time(), t.microstep()}; }

}  // namespace

TEST(CompareTags, MicrostepBreaksTimestampTie) { EXPECT_EQ(compare_tags(Tag{5, 0}, Tag{5, 1}), Ordering::less); }

TEST(CompareTags, Reflexive) { EXPECT_EQ(compare_tags(Tag{7, 3}, Tag{7, 3}), Ordering::equal); }

TEST(CompareTags, NeverBelowFiniteTags) {
  EXPECT_EQ(compare_tags(Tag::never(), Tag{-9999, 0}), Ordering::less);
  EXPECT_EQ(compare_tags(Tag{Tag::kMinTime + 1, 0}, Tag::never()), Ordering::greater);
}

TEST(CompareTags, ForeverAboveFiniteTags) {
  EXPECT_EQ(compare_tags(Tag::forever(), Tag{Tag::kMaxTime - 1, Tag::kMaxMicrostep}), Ordering::greater);
  EXPECT_TRUE(Tag::never() < Tag::forever());
}

TEST(DelayTag, PositiveDelayAddsAndResetsMicrostep) {
  EXPECT_EQ(delay_tag(Tag{ms(5), 0}, Delay(200ms)), (Tag{ms(205), 0}));
  EXPECT_EQ(delay_tag(Tag{ms(5), 7}, Delay(1ns)), (Tag{ms(5) + 1, 0}));
}

TEST(DelayTag, ZeroDelayBumpsMicrostep) {
  EXPECT_EQ(delay_tag(Tag{ms(5), 2}, Delay(0ns)), (Tag{ms(5), 3}));
  EXPECT_EQ(delay_tag(Tag{ms(5), 2}, Delay::none()), (Tag{ms(5), 3}));
}

TEST(DelayTag, SaturatesAtForever) {
  EXPECT_EQ(delay_tag(Tag{Tag::kMaxTime - 1, 0}, Delay(Nanos{1'000'000'000})), Tag::forever());
  EXPECT_EQ(delay_tag(Tag{5, Tag::kMaxMicrostep}, Delay::none()), Tag::forever());
}

TEST(DelayTag, NonFiniteTagsPassThrough) {
  EXPECT_EQ(delay_tag(Tag::never(), Delay(1ms)), Tag::never());
  EXPECT_EQ(delay_tag(Tag::forever(), Delay::none()), Tag::forever());
}

TEST(DelayTag, NegativeDelayRejected) { EXPECT_THROW(Delay(Nanos{-1}), std::invalid_argument); }

TEST(NextMicrostep, IsTheImmediateSuccessor) {
  EXPECT_EQ(next_microstep(Tag{ms(1000), 0}), (Tag{ms(1000), 1}));
  EXPECT_EQ(next_microstep(Tag{4, Tag::kMaxMicrostep}), (Tag{5, 0}));
}

TEST(TagFormat, PrintsSentinelsByName) {
  EXPECT_EQ(to_string(Tag::never()), "NEVER");
  EXPECT_EQ(to_string(Tag::forever()), "FOREVER");
  std::ostringstream os;
  os << Tag{12, 3};
  EXPECT_EQ(os.str(), to_string(Tag{12, 3}));
}

TEST(TimingModel, RejectsNegativeBounds) {
  TimingModel ok{1ms, 2ms};
  EXPECT_NO_THROW(ok.validate());
  TimingModel bad{-1ms, 0ms};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  TimingModel bad_l{0ms, Nanos{-5}};
  EXPECT_THROW(bad_l.validate(), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Properties.

TEST(TagOrderProperty, AgreesWithLexicographicPairOrder) {
  test::Rng rng;
  for (int i = 0; i < 20000; ++i) {
    const auto a = rng.tag(), b = rng.tag();
    const auto expected = key(a) < key(b) ? Ordering::less : key(a) == key(b) ? Ordering::equal : Ordering::greater;
    ASSERT_EQ(compare_tags(a, b), expected) << a << " vs " << b;
    ASSERT_EQ(a < b, expected == Ordering::less);
  }
}

TEST(TagOrderProperty, TrichotomyAndTransitivity) {
  test::Rng rng;
  for (int i = 0; i < 20000; ++i) {
    const auto a = rng.any_tag(), b = rng.any_tag(), c = rng.any_tag();
    const int relations = (a < b) + (a == b) + (b < a);
    ASSERT_EQ(relations, 1) << a << " " << b;
    if (a < b && b < c) {
      ASSERT_TRUE(a < c) << a << " " << b << " " << c;
    }
    if (a <= b && b <= c) {
      ASSERT_TRUE(a <= c);
    }
    ASSERT_TRUE(Tag::never() <= a && a <= Tag::forever());
  }
}

TEST(DelayTagProperty, MonotoneForEveryFixedDelay) {
  test::Rng rng;
  for (int i = 0; i < 20000; ++i) {
    auto g1 = rng.tag(), g2 = rng.tag();
    if (g2 < g1) std::swap(g1, g2);
    const auto a = rng.chance(0.3) ? Delay::none() : Delay(Nanos{rng.range(0, 100)});
    ASSERT_LE(delay_tag(g1, a), delay_tag(g2, a)) << g1 << " " << g2 << " a=" << a.value().count();
  }
}

TEST(DelayTagProperty, PositiveResetsMicrostepZeroKeepsTime) {
  test::Rng rng;
  for (int i = 0; i < 20000; ++i) {
    const auto g = Tag{rng.range(-1'000'000, 1'000'000), static_cast<Tag::Microstep>(rng.below(1000))};
    const auto d = rng.range(1, 1'000'000);
    const auto pos = delay_tag(g, Delay(Nanos{d}));
    ASSERT_EQ(pos.microstep(), 0u);
    ASSERT_EQ(pos.time(), g.time() + d);
    const auto zero = delay_tag(g, Delay(Nanos{0}));
    ASSERT_EQ(zero.time(), g.time());
    ASSERT_EQ(zero.microstep(), g.microstep() + 1);
    ASSERT_GT(delay_tag(g, Delay::none()), g);  // strict causality
  }
}

#include "hprm/error.hpp"
#include "hprm/serde.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <functional>

using namespace hprm;
using test::errc_of;

namespace {

std::uint64_t le_at(const std::vector<std::byte>& b, std::size_t at, std::size_t width) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < width; ++i) v |= std::uint64_t{std::to_integer<std::uint8_t>(b[at + i])} << (8 * i);
  return v;
}

Value payload_map(std::size_t array_bytes) {
  std::vector<double> xs(array_bytes / 8);
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = 0.5 * static_cast<double>(i);
  Value::Map m;
  m.emplace("array", Value(TypedArray::from_vector(std::move(xs))));
  m.emplace("name", Value("frame"));
  m.emplace("n", Value(7));
  return Value(std::move(m));
}

/// Random value trees: every leaf kind, nesting, and buffers on both sides of
/// the out-of-band floor.
class ValueGen {
 public:
  explicit ValueGen(test::Rng& rng) : rng_(rng) {}

  Value any(int depth = 0) {
    const auto k = rng_.below(depth >= 4 ? 7 : 9);
    switch (k) {
      case 0: return Value{};
      case 1: return Value{rng_.chance(0.5)};
      case 2: return Value{static_cast<std::int64_t>(rng_.bits())};
      case 3: return Value{std::bit_cast<double>(rng_.bits())};
      case 4: return Value{string()};
      case 5: return Value{Blob{Buffer::adopt(bytes(length()))}};
      case 6: return Value{array()};
      case 7: {
        Value::Sequence s;
        for (auto n = rng_.below(5); n > 0; --n) s.push_back(any(depth + 1));
        return Value{std::move(s)};
      }
      default: {
        Value::Map m;
        for (auto n = rng_.below(5); n > 0; --n) m.insert_or_assign(string(), any(depth + 1));
        return Value{std::move(m)};
      }
    }
  }

 private:
  std::size_t length() {
    switch (rng_.below(4)) {
      case 0: return rng_.below(16);
      case 1: return kDefaultOutOfBandFloor - 1 + rng_.below(3);
      default: return rng_.below(10000);
    }
  }
  std::vector<std::byte> bytes(std::size_t n) {
    std::vector<std::byte> b(n);
    for (auto& x : b) x = static_cast<std::byte>(rng_.below(256));
    return b;
  }
  std::string string() {
    std::string s(rng_.below(12), ' ');
    for (auto& c : s) c = static_cast<char>(rng_.below(256));
    return s;
  }
  TypedArray array() {
    static constexpr DType kTypes[] = {DType::int8,   DType::uint8,  DType::int16,   DType::uint16,
                                       DType::int32,  DType::uint32, DType::int64,   DType::uint64,
                                       DType::float32, DType::float64, DType::boolean};
    const auto dt = kTypes[rng_.below(std::size(kTypes))];
    std::vector<std::uint64_t> shape;
    std::uint64_t count = 1;
    for (auto r = rng_.below(4); r > 0; --r) {
      shape.push_back(rng_.below(rng_.chance(0.2) ? 800 : 9));
      count *= shape.back();
    }
    return TypedArray(dt, shape, Buffer::adopt(bytes(count * dtype_size(dt))));
  }

  test::Rng& rng_;
};

}  // namespace

TEST(Serde, ScalarsRoundTrip) {
  for (const Value& v : {Value{}, Value{true}, Value{false}, Value{std::int64_t{-42}}, Value{3.25},
                         Value{std::nan("")}, Value{"hello"}, Value{std::string{}}}) {
    EXPECT_EQ(deserialize(serialize(v)), v);
  }
}

TEST(Serde, LargeArrayTravelsAsSegmentWithoutCopy) {
  const auto v = payload_map(10 << 20);
  const auto& arr = v.as<Value::Map>().find("array")->second.as<TypedArray>();
  serde_counters() = {};
  auto p = serialize(v);
  ASSERT_EQ(p.segments.size(), 1u);
  EXPECT_EQ(p.segments[0].data(), arr.data.data());
  EXPECT_LT(p.inband.size(), 128u);
  EXPECT_LT(serde_counters().bytes_copied, 64u);
  EXPECT_EQ(classify(v), SerializationStrategy::recursive);

  auto back = deserialize(p);
  EXPECT_EQ(back, v);
  EXPECT_EQ(back.as<Value::Map>().find("array")->second.as<TypedArray>().data.data(), arr.data.data());
  EXPECT_LT(serde_counters().bytes_copied, 64u);
}

TEST(Serde, ClassifyByShape) {
  EXPECT_EQ(classify(Value{"x"}), SerializationStrategy::in_band);
  EXPECT_EQ(classify(Value{TypedArray::from_vector(std::vector<double>(10))}), SerializationStrategy::in_band);
  EXPECT_EQ(classify(Value{TypedArray::from_vector(std::vector<double>(1000))}), SerializationStrategy::out_of_band);
  EXPECT_EQ(classify(payload_map(1 << 16)), SerializationStrategy::recursive);
  EXPECT_EQ(classify(payload_map(64)), SerializationStrategy::in_band);
  EXPECT_EQ(classify(payload_map(1 << 16), SerdeOptions::force_in_band()), SerializationStrategy::in_band);
}

TEST(Serde, ForcedInBandHasNoSegments) {
  const auto v = payload_map(1 << 16);
  auto p = serialize(v, SerdeOptions::force_in_band());
  EXPECT_TRUE(p.segments.empty());
  EXPECT_GT(p.inband.size(), std::size_t{1} << 16);
  EXPECT_EQ(deserialize(p), v);
}

TEST(Serde, PayloadHeaderIsBitExact) {
  SerializedPayload p;
  p.inband = Buffer::adopt(test::bytes_of({0xAA, 0xBB, 0xCC}));
  p.segments = {Buffer::adopt(std::vector<std::byte>(5)), Buffer::adopt(std::vector<std::byte>(0x0102))};
  const auto h = encode_payload_header(p);
  ASSERT_EQ(h.size(), 1u + 4 + 3 + 2 + 16);
  EXPECT_EQ(h[0], std::byte{kSchemaVersion});
  EXPECT_EQ(le_at(h, 1, 4), 3u);
  EXPECT_EQ(h[5], std::byte{0xAA});
  EXPECT_EQ(h[7], std::byte{0xCC});
  EXPECT_EQ(le_at(h, 8, 2), 2u);
  EXPECT_EQ(le_at(h, 10, 8), 5u);
  EXPECT_EQ(le_at(h, 18, 8), 0x0102u);
  EXPECT_EQ(p.header_size(), h.size());
  EXPECT_EQ(p.encoded_size(), h.size() + 5 + 0x0102);

  auto parsed = parse_payload_header(h);
  EXPECT_EQ(parsed.size, h.size());
  EXPECT_EQ(parsed.segment_lengths, (std::vector<std::uint64_t>{5, 0x0102}));
}

TEST(Serde, InlineEncodingRoundTrips) {
  const auto v = payload_map(1 << 15);
  auto p = serialize(v);
  auto wire = Buffer::adopt(encode_inline(p));
  EXPECT_EQ(wire.size(), p.encoded_size());
  auto q = decode_inline(wire);
  EXPECT_EQ(deserialize(q), v);
}

TEST(Serde, DecodeErrors) {
  auto p = serialize(payload_map(1 << 15));
  auto missing = p;
  missing.segments.clear();
  EXPECT_EQ(errc_of([&] { deserialize(missing); }), Errc::segment_mismatch);
  auto extra = p;
  extra.segments.push_back(Buffer::adopt(std::vector<std::byte>(3)));
  EXPECT_EQ(errc_of([&] { deserialize(extra); }), Errc::segment_mismatch);
  auto cut = p;
  cut.inband = p.inband.slice(0, p.inband.size() - 1);
  EXPECT_EQ(errc_of([&] { deserialize(cut); }), Errc::truncated);
  auto version = p;
  version.version = 99;
  EXPECT_EQ(errc_of([&] { deserialize(version); }), Errc::unknown_schema);
  SerializedPayload junk;
  junk.inband = Buffer::adopt(test::bytes_of({0x7F}));
  EXPECT_EQ(errc_of([&] { deserialize(junk); }), Errc::malformed);

  auto wire = encode_inline(p);
  wire.pop_back();
  EXPECT_EQ(errc_of([&] { decode_inline(Buffer::adopt(std::move(wire))); }), Errc::truncated);
  EXPECT_EQ(errc_of([&] { parse_payload_header({}); }), Errc::truncated);
}

TEST(Serde, ExcessiveNestingRejected) {
  Value v{1};
  for (int i = 0; i < 400; ++i) v = Value{Value::Sequence{v}};
  EXPECT_EQ(errc_of([&] { serialize(v); }), Errc::unsupported_type);
}

TEST(Serde, ArrayShapeMismatchRejected) {
  EXPECT_THROW(TypedArray(DType::float64, {3}, Buffer::adopt(std::vector<std::byte>(23))), std::invalid_argument);
}

TEST(Serde, ThroughputFavorsOutOfBand) {
  const auto in = measure_throughput(1 << 20, ThroughputMode::in_band, 5);
  const auto out = measure_throughput(1 << 20, ThroughputMode::out_of_band, 5);
  EXPECT_GT(out.serialize_mb_per_s, in.serialize_mb_per_s);
  EXPECT_GT(out.deserialize_mb_per_s, in.deserialize_mb_per_s);
  EXPECT_EQ(errc_of([] { measure_throughput(100, ThroughputMode::in_band, 1); }), Errc::precondition);
}

TEST(SerdeProperty, RandomTreesRoundTripUnderEveryStrategy) {
  test::Rng rng;
  ValueGen gen(rng);
  for (int i = 0; i < 1500; ++i) {
    const auto v = gen.any();
    for (const auto& opts : {SerdeOptions{}, SerdeOptions::force_in_band(), SerdeOptions::force_out_of_band()}) {
      const auto p = serialize(v, opts);
      ASSERT_EQ(deserialize(p), v);
      ASSERT_EQ(deserialize(decode_inline(Buffer::adopt(encode_inline(p)))), v);
    }
  }
}

TEST(SerdeProperty, SerializationIsDeterministic) {
  test::Rng rng;
  ValueGen gen(rng);
  for (int i = 0; i < 500; ++i) {
    const auto v = gen.any();
    ASSERT_EQ(encode_inline(serialize(v)), encode_inline(serialize(v)));
  }
}

TEST(SerdeProperty, LargeLeavesAreNeverCopied) {
  // Every segment must alias a buffer of the source value, and the bytes the
  // serializer copies are bounded by the in-band stream.
  test::Rng rng;
  ValueGen gen(rng);
  for (int i = 0; i < 800; ++i) {
    const auto v = gen.any();
    serde_counters() = {};
    const auto p = serialize(v);
    ASSERT_LE(serde_counters().bytes_copied, p.inband.size());
    std::vector<const std::byte*> leaves;
    std::function<void(const Value&)> walk = [&](const Value& x) {
      if (x.is<Blob>() && x.as<Blob>().data.size() >= kDefaultOutOfBandFloor) leaves.push_back(x.as<Blob>().data.data());
      if (x.is<TypedArray>() && x.as<TypedArray>().byte_size() >= kDefaultOutOfBandFloor) {
        leaves.push_back(x.as<TypedArray>().data.data());
      }
      if (x.is<Value::Sequence>()) for (const auto& e : x.as<Value::Sequence>()) walk(e);
      if (x.is<Value::Map>()) for (const auto& [k, e] : x.as<Value::Map>()) walk(e);
    };
    walk(v);
    ASSERT_EQ(p.segments.size(), leaves.size());
    for (std::size_t s = 0; s < leaves.size(); ++s) ASSERT_EQ(p.segments[s].data(), leaves[s]);
    const auto expected = leaves.empty() ? SerializationStrategy::in_band
                          : (v.is<Blob>() || v.is<TypedArray>()) ? SerializationStrategy::out_of_band
                                                                 : SerializationStrategy::recursive;
    ASSERT_EQ(classify(v), expected);
  }
}

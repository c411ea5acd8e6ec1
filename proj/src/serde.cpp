#include "hprm/serde.hpp"

#include "hprm/clock.hpp"
#include "hprm/error.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <limits>
#include <stdexcept>

namespace hprm {

// ---------------------------------------------------------------------------
// Buffer / TypedArray / Value

Buffer Buffer::adopt(std::vector<std::byte>&& bytes) {
  auto holder = std::make_shared<std::vector<std::byte>>(std::move(bytes));
  std::span<const std::byte> view(holder->data(), holder->size());
  return Buffer(std::move(holder), view);
}

Buffer Buffer::copy_of(std::span<const std::byte> bytes) {
  return adopt(std::vector<std::byte>(bytes.begin(), bytes.end()));
}

Buffer Buffer::slice(std::size_t offset, std::size_t length) const {
  if (offset > bytes_.size() || length > bytes_.size() - offset) {
    throw std::out_of_range("buffer slice out of range");
  }
  return Buffer(owner_, bytes_.subspan(offset, length));
}

bool operator==(const Buffer& a, const Buffer& b) noexcept {
  if (a.size() != b.size()) return false;
  if (a.data() == b.data() || a.size() == 0) return true;
  return std::memcmp(a.data(), b.data(), a.size()) == 0;
}

std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::int8:
    case DType::uint8:
    case DType::boolean: return 1;
    case DType::int16:
    case DType::uint16: return 2;
    case DType::int32:
    case DType::uint32:
    case DType::float32: return 4;
    case DType::int64:
    case DType::uint64:
    case DType::float64: return 8;
  }
  throw std::invalid_argument("unknown dtype");
}

bool dtype_valid(std::uint8_t raw) noexcept {
  return raw >= static_cast<std::uint8_t>(DType::int8) && raw <= static_cast<std::uint8_t>(DType::boolean);
}

namespace {
// Returns false on overflow.
bool shape_bytes(DType dtype, const std::vector<std::uint64_t>& shape, std::uint64_t& out) {
  std::uint64_t n = 1;
  for (auto d : shape) {
    if (d != 0 && n > std::numeric_limits<std::uint64_t>::max() / d) return false;
    n *= d;
  }
  auto es = dtype_size(dtype);
  if (n > std::numeric_limits<std::uint64_t>::max() / es) return false;
  out = n * es;
  return true;
}
}  // namespace

TypedArray::TypedArray(DType dtype_, std::vector<std::uint64_t> shape_, Buffer data_)
    : dtype(dtype_), shape(std::move(shape_)), data(std::move(data_)) {
  std::uint64_t expected = 0;
  if (!shape_bytes(dtype, shape, expected) || expected != data.size()) {
    throw std::invalid_argument("typed array shape does not match data length");
  }
}

std::uint64_t TypedArray::element_count() const noexcept {
  std::uint64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

namespace {

struct ValueEq {
  bool operator()(std::monostate, std::monostate) const { return true; }
  bool operator()(bool a, bool b) const { return a == b; }
  bool operator()(std::int64_t a, std::int64_t b) const { return a == b; }
  bool operator()(double a, double b) const {
    return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
  }
  bool operator()(const std::string& a, const std::string& b) const { return a == b; }
  bool operator()(const Blob& a, const Blob& b) const { return a.data == b.data; }
  bool operator()(const TypedArray& a, const TypedArray& b) const {
    return a.dtype == b.dtype && a.shape == b.shape && a.data == b.data;
  }
  bool operator()(const Value::Sequence& a, const Value::Sequence& b) const { return a == b; }
  bool operator()(const Value::Map& a, const Value::Map& b) const { return a == b; }
  template <typename A, typename B> bool operator()(const A&, const B&) const { return false; }
};

}  // namespace

bool operator==(const Value& a, const Value& b) {
  return std::visit(ValueEq{}, a.storage(), b.storage());
}

// ---------------------------------------------------------------------------
// Encoding

namespace {

enum Code : std::uint8_t {
  kNull = 0x00,
  kFalse = 0x01,
  kTrue = 0x02,
  kInt = 0x03,
  kFloat = 0x04,
  kString = 0x05,
  kBlobInline = 0x06,
  kBlobSegment = 0x07,
  kArrayInline = 0x08,
  kArraySegment = 0x09,
  kSequence = 0x0A,
  kMap = 0x0B,
};

constexpr int kMaxDepth = 256;

thread_local SerdeCounters t_counters;

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<std::byte>(v)); }
  void u16(std::uint16_t v) { le(v); }
  void u32(std::uint32_t v) { le(v); }
  void u64(std::uint64_t v) { le(v); }
  void bytes(std::span<const std::byte> b) {
    out_.insert(out_.end(), b.begin(), b.end());
    t_counters.bytes_copied += b.size();
  }
  std::vector<std::byte> take() { return std::move(out_); }

 private:
  template <typename T> void le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<std::byte>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
    }
  }
  std::vector<std::byte> out_;
};

template <typename T> void store_le(std::byte* p, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    p[i] = static_cast<std::byte>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF);
  }
}

template <typename T> T load_le(const std::byte* p) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(std::to_integer<std::uint8_t>(p[i])) << (8 * i);
  }
  return static_cast<T>(v);
}

bool has_out_of_band_leaf(const Value& v, std::size_t floor) {
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Blob>) {
          return x.data.size() >= floor;
        } else if constexpr (std::is_same_v<T, TypedArray>) {
          return x.data.size() >= floor;
        } else if constexpr (std::is_same_v<T, Value::Sequence>) {
          return std::any_of(x.begin(), x.end(), [&](const Value& e) { return has_out_of_band_leaf(e, floor); });
        } else if constexpr (std::is_same_v<T, Value::Map>) {
          return std::any_of(x.begin(), x.end(),
                             [&](const auto& kv) { return has_out_of_band_leaf(kv.second, floor); });
        } else {
          return false;
        }
      },
      v.storage());
}

class Encoder {
 public:
  explicit Encoder(const SerdeOptions& opts) : opts_(opts) {}

  void encode(const Value& v, int depth) {
    if (depth > kMaxDepth) throw Error(Errc::unsupported_type, "value nesting exceeds depth limit");
    std::visit([&](const auto& x) { put(x, depth); }, v.storage());
  }

  SerializedPayload finish() {
    SerializedPayload p;
    p.inband = Buffer::adopt(w_.take());
    p.segments = std::move(segments_);
    return p;
  }

 private:
  void put(std::monostate, int) { w_.u8(kNull); }
  void put(bool b, int) { w_.u8(b ? kTrue : kFalse); }
  void put(std::int64_t i, int) {
    w_.u8(kInt);
    w_.u64(static_cast<std::uint64_t>(i));
  }
  void put(double d, int) {
    w_.u8(kFloat);
    w_.u64(std::bit_cast<std::uint64_t>(d));
  }
  void put(const std::string& s, int) {
    if (s.size() > std::numeric_limits<std::uint32_t>::max()) {
      throw Error(Errc::unsupported_type, "string longer than 4 GiB");
    }
    w_.u8(kString);
    w_.u32(static_cast<std::uint32_t>(s.size()));
    w_.bytes(std::as_bytes(std::span(s.data(), s.size())));
  }
  void put(const Blob& b, int) {
    if (b.data.size() >= opts_.out_of_band_floor) {
      w_.u8(kBlobSegment);
      w_.u32(next_segment(b.data));
    } else {
      w_.u8(kBlobInline);
      w_.u64(b.data.size());
      w_.bytes(b.data.bytes());
    }
  }
  void put(const TypedArray& a, int) {
    if (a.shape.size() > 255) throw Error(Errc::unsupported_type, "array rank above 255");
    const bool oob = a.data.size() >= opts_.out_of_band_floor;
    w_.u8(oob ? kArraySegment : kArrayInline);
    w_.u8(static_cast<std::uint8_t>(a.dtype));
    w_.u8(static_cast<std::uint8_t>(a.shape.size()));
    for (auto d : a.shape) w_.u64(d);
    if (oob) {
      w_.u32(next_segment(a.data));
    } else {
      w_.bytes(a.data.bytes());
    }
  }
  void put(const Value::Sequence& seq, int depth) {
    w_.u8(kSequence);
    w_.u32(checked_count(seq.size()));
    for (const auto& e : seq) encode(e, depth + 1);
  }
  void put(const Value::Map& map, int depth) {
    w_.u8(kMap);
    w_.u32(checked_count(map.size()));
    // std::map iterates in sorted key order, which keeps the output canonical.
    for (const auto& [k, v] : map) {
      w_.u32(checked_count(k.size()));
      w_.bytes(std::as_bytes(std::span(k.data(), k.size())));
      encode(v, depth + 1);
    }
  }

  std::uint32_t next_segment(const Buffer& b) {
    if (segments_.size() >= std::numeric_limits<std::uint16_t>::max()) {
      throw Error(Errc::unsupported_type, "more than 65535 out-of-band segments");
    }
    segments_.push_back(b);
    return static_cast<std::uint32_t>(segments_.size() - 1);
  }

  static std::uint32_t checked_count(std::size_t n) {
    if (n > std::numeric_limits<std::uint32_t>::max()) throw Error(Errc::unsupported_type, "container too large");
    return static_cast<std::uint32_t>(n);
  }

  const SerdeOptions& opts_;
  Writer w_;
  std::vector<Buffer> segments_;
};

class Decoder {
 public:
  Decoder(const SerializedPayload& p) : p_(p), in_(p.inband.bytes()) {}

  Value run() {
    Value v = decode(0);
    if (pos_ != in_.size()) throw Error(Errc::malformed, "trailing bytes after value");
    if (next_segment_ != p_.segments.size()) {
      throw Error(Errc::segment_mismatch, "payload carries " + std::to_string(p_.segments.size()) +
                                              " segments but the stream references " +
                                              std::to_string(next_segment_));
    }
    return v;
  }

 private:
  Value decode(int depth) {
    if (depth > kMaxDepth) throw Error(Errc::malformed, "nesting exceeds depth limit");
    const auto code = u8();
    switch (code) {
      case kNull: return Value{};
      case kFalse: return Value{false};
      case kTrue: return Value{true};
      case kInt: return Value{static_cast<std::int64_t>(u64())};
      case kFloat: return Value{std::bit_cast<double>(u64())};
      case kString: {
        auto n = u32();
        auto b = take(n);
        return Value{std::string(reinterpret_cast<const char*>(b.data()), b.size())};
      }
      case kBlobInline: {
        auto n = u64();
        auto b = take(n);
        t_counters.bytes_copied += b.size();
        return Value{Blob{Buffer::copy_of(b)}};
      }
      case kBlobSegment: return Value{Blob{segment(u32())}};
      case kArrayInline:
      case kArraySegment: {
        const auto raw = u8();
        if (!dtype_valid(raw)) throw Error(Errc::malformed, "unknown dtype " + std::to_string(raw));
        const auto dtype = static_cast<DType>(raw);
        const auto rank = u8();
        std::vector<std::uint64_t> shape(rank);
        for (auto& d : shape) d = u64();
        std::uint64_t nbytes = 0;
        if (!shape_bytes(dtype, shape, nbytes)) throw Error(Errc::malformed, "array shape overflows");
        Buffer data;
        if (code == kArraySegment) {
          data = segment(u32());
        } else {
          auto b = take(nbytes);
          t_counters.bytes_copied += b.size();
          data = Buffer::copy_of(b);
        }
        if (data.size() != nbytes) throw Error(Errc::malformed, "array data length disagrees with shape");
        return Value{TypedArray(dtype, std::move(shape), std::move(data))};
      }
      case kSequence: {
        auto n = u32();
        Value::Sequence seq;
        seq.reserve(std::min<std::size_t>(n, in_.size() - pos_));
        for (std::uint32_t i = 0; i < n; ++i) seq.push_back(decode(depth + 1));
        return Value{std::move(seq)};
      }
      case kMap: {
        auto n = u32();
        Value::Map map;
        for (std::uint32_t i = 0; i < n; ++i) {
          auto klen = u32();
          auto kb = take(klen);
          std::string key(reinterpret_cast<const char*>(kb.data()), kb.size());
          map.insert_or_assign(std::move(key), decode(depth + 1));
        }
        return Value{std::move(map)};
      }
      default: throw Error(Errc::malformed, "unknown value code " + std::to_string(code));
    }
  }

  Buffer segment(std::uint32_t index) {
    if (index != next_segment_) {
      throw Error(Errc::segment_mismatch, "placeholder " + std::to_string(index) + " out of order");
    }
    if (index >= p_.segments.size()) {
      throw Error(Errc::segment_mismatch, "placeholder " + std::to_string(index) + " has no segment");
    }
    ++next_segment_;
    return p_.segments[index];
  }

  std::span<const std::byte> take(std::uint64_t n) {
    if (n > in_.size() - pos_) throw Error(Errc::truncated, "in-band stream truncated");
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8() { return load_le<std::uint8_t>(take(1).data()); }
  std::uint32_t u32() { return load_le<std::uint32_t>(take(4).data()); }
  std::uint64_t u64() { return load_le<std::uint64_t>(take(8).data()); }

  const SerializedPayload& p_;
  std::span<const std::byte> in_;
  std::size_t pos_ = 0;
  std::size_t next_segment_ = 0;
};

}  // namespace

SerdeCounters& serde_counters() noexcept { return t_counters; }

SerializationStrategy classify(const Value& v, const SerdeOptions& opts) {
  if (v.is<TypedArray>() || v.is<Blob>()) {
    return has_out_of_band_leaf(v, opts.out_of_band_floor) ? SerializationStrategy::out_of_band
                                                           : SerializationStrategy::in_band;
  }
  if ((v.is<Value::Sequence>() || v.is<Value::Map>()) && has_out_of_band_leaf(v, opts.out_of_band_floor)) {
    return SerializationStrategy::recursive;
  }
  return SerializationStrategy::in_band;
}

SerializedPayload serialize(const Value& v, const SerdeOptions& opts) {
  Encoder enc(opts);
  enc.encode(v, 0);
  return enc.finish();
}

Value deserialize(const SerializedPayload& payload) {
  if (payload.version != kSchemaVersion) {
    throw Error(Errc::unknown_schema, "unknown schema version " + std::to_string(payload.version));
  }
  return Decoder(payload).run();
}

std::size_t SerializedPayload::segment_bytes() const noexcept {
  std::size_t n = 0;
  for (const auto& s : segments) n += s.size();
  return n;
}

std::size_t SerializedPayload::header_size() const noexcept {
  return 1 + 4 + inband.size() + 2 + 8 * segments.size();
}

std::size_t SerializedPayload::encoded_size() const noexcept { return header_size() + segment_bytes(); }

void write_payload_header(const SerializedPayload& p, std::span<std::byte> out) {
  if (out.size() < p.header_size()) throw std::invalid_argument("payload header buffer too small");
  if (p.inband.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(Errc::unsupported_type, "in-band stream exceeds 4 GiB");
  }
  std::byte* w = out.data();
  *w++ = static_cast<std::byte>(p.version);
  store_le<std::uint32_t>(w, static_cast<std::uint32_t>(p.inband.size()));
  w += 4;
  if (!p.inband.empty()) std::memcpy(w, p.inband.data(), p.inband.size());
  w += p.inband.size();
  store_le<std::uint16_t>(w, static_cast<std::uint16_t>(p.segments.size()));
  w += 2;
  for (const auto& s : p.segments) {
    store_le<std::uint64_t>(w, s.size());
    w += 8;
  }
}

std::vector<std::byte> encode_payload_header(const SerializedPayload& p) {
  std::vector<std::byte> out(p.header_size());
  write_payload_header(p, out);
  return out;
}

std::vector<std::byte> encode_inline(const SerializedPayload& p) {
  std::vector<std::byte> out(p.encoded_size());
  write_payload_header(p, out);
  std::size_t at = p.header_size();
  for (const auto& s : p.segments) {
    if (!s.empty()) std::memcpy(out.data() + at, s.data(), s.size());
    at += s.size();
  }
  return out;
}

PayloadHeader parse_payload_header(std::span<const std::byte> bytes) {
  PayloadHeader h;
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (n > bytes.size() - pos) throw Error(Errc::truncated, "payload header truncated");
  };
  need(1);
  h.version = std::to_integer<std::uint8_t>(bytes[pos++]);
  if (h.version != kSchemaVersion) {
    throw Error(Errc::unknown_schema, "unknown schema version " + std::to_string(h.version));
  }
  need(4);
  auto inband_len = load_le<std::uint32_t>(bytes.data() + pos);
  pos += 4;
  need(inband_len);
  h.inband = bytes.subspan(pos, inband_len);
  pos += inband_len;
  need(2);
  auto count = load_le<std::uint16_t>(bytes.data() + pos);
  pos += 2;
  need(std::size_t{8} * count);
  h.segment_lengths.resize(count);
  for (auto& len : h.segment_lengths) {
    len = load_le<std::uint64_t>(bytes.data() + pos);
    pos += 8;
  }
  h.size = pos;
  return h;
}

SerializedPayload decode_inline(const Buffer& wire) {
  auto h = parse_payload_header(wire.bytes());
  SerializedPayload p;
  p.version = h.version;
  p.inband = wire.slice(static_cast<std::size_t>(h.inband.data() - wire.data()), h.inband.size());
  std::size_t at = h.size;
  for (auto len : h.segment_lengths) {
    if (len > wire.size() - at) throw Error(Errc::truncated, "segment bytes truncated");
    p.segments.push_back(wire.slice(at, len));
    at += len;
  }
  if (at != wire.size()) throw Error(Errc::malformed, "trailing bytes after segments");
  return p;
}

// ---------------------------------------------------------------------------
// Throughput

namespace {
double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}
}  // namespace

Throughput measure_throughput(std::size_t size_bytes, ThroughputMode mode, int iterations) {
  if (size_bytes < 1024) throw Error(Errc::precondition, "throughput size must be at least 1 KiB");
  if (iterations < 1) throw Error(Errc::precondition, "iterations must be positive");

  Value value = [&] {
    if (size_bytes % 8 == 0) {
      std::vector<double> v(size_bytes / 8);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
      return Value{TypedArray::from_vector(std::move(v))};
    }
    std::vector<std::uint8_t> v(size_bytes);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<std::uint8_t>(i);
    return Value{TypedArray::from_vector(std::move(v))};
  }();

  const auto opts = mode == ThroughputMode::in_band ? SerdeOptions::force_in_band()
                                                    : SerdeOptions::force_out_of_band();
  const double mib = static_cast<double>(size_bytes) / (1024.0 * 1024.0);
  volatile std::size_t sink = 0;

  std::vector<double> ser_rates, de_rates;
  ser_rates.reserve(iterations);
  de_rates.reserve(iterations);
  for (int i = 0; i < iterations; ++i) {
    const auto t0 = monotonic_now();
    auto payload = serialize(value, opts);
    const auto t1 = monotonic_now();
    sink = sink + payload.inband.size() + payload.segments.size();
    ser_rates.push_back(mib / (std::max<std::int64_t>(t1 - t0, 1) * 1e-9));
  }
  const auto payload = serialize(value, opts);
  for (int i = 0; i < iterations; ++i) {
    const auto t0 = monotonic_now();
    auto out = deserialize(payload);
    const auto t1 = monotonic_now();
    sink = sink + out.as<TypedArray>().byte_size();
    de_rates.push_back(mib / (std::max<std::int64_t>(t1 - t0, 1) * 1e-9));
  }
  return {median(std::move(ser_rates)), median(std::move(de_rates))};
}

}  // namespace hprm

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

namespace hprm {

/// Immutable view over bytes. The owner handle keeps whatever backs the view
/// alive (a heap vector, a store mapping, a caller buffer), so slices and
/// copies of a Buffer never duplicate the bytes themselves.
class Buffer {
 public:
  Buffer() = default;
  Buffer(std::shared_ptr<const void> owner, std::span<const std::byte> bytes) noexcept
      : owner_(std::move(owner)), bytes_(bytes) {}

  static Buffer adopt(std::vector<std::byte>&& bytes);
  static Buffer copy_of(std::span<const std::byte> bytes);
  /// Non-owning view; the caller guarantees the bytes outlive every copy.
  static Buffer borrow(std::span<const std::byte> bytes) noexcept { return Buffer({}, bytes); }

  [[nodiscard]] std::span<const std::byte> bytes() const noexcept { return bytes_; }
  [[nodiscard]] const std::byte* data() const noexcept { return bytes_.data(); }
  [[nodiscard]] std::size_t size() const noexcept { return bytes_.size(); }
  [[nodiscard]] bool empty() const noexcept { return bytes_.empty(); }
  [[nodiscard]] const std::shared_ptr<const void>& owner() const noexcept { return owner_; }

  [[nodiscard]] Buffer slice(std::size_t offset, std::size_t length) const;

  /// Content equality.
  friend bool operator==(const Buffer& a, const Buffer& b) noexcept;

 private:
  std::shared_ptr<const void> owner_;
  std::span<const std::byte> bytes_;
};

enum class DType : std::uint8_t {
  int8 = 1, uint8, int16, uint16, int32, uint32, int64, uint64, float32, float64, boolean,
};

std::size_t dtype_size(DType t);
bool dtype_valid(std::uint8_t raw) noexcept;

template <typename T> constexpr DType dtype_of() {
  if constexpr (std::is_same_v<T, bool>) return DType::boolean;
  else if constexpr (std::is_same_v<T, std::int8_t>) return DType::int8;
  else if constexpr (std::is_same_v<T, std::uint8_t>) return DType::uint8;
  else if constexpr (std::is_same_v<T, std::int16_t>) return DType::int16;
  else if constexpr (std::is_same_v<T, std::uint16_t>) return DType::uint16;
  else if constexpr (std::is_same_v<T, std::int32_t>) return DType::int32;
  else if constexpr (std::is_same_v<T, std::uint32_t>) return DType::uint32;
  else if constexpr (std::is_same_v<T, std::int64_t>) return DType::int64;
  else if constexpr (std::is_same_v<T, std::uint64_t>) return DType::uint64;
  else if constexpr (std::is_same_v<T, float>) return DType::float32;
  else if constexpr (std::is_same_v<T, double>) return DType::float64;
  else static_assert(!sizeof(T), "unsupported element type");
}

/// Contiguous n-dimensional numeric array. shape product x element size must
/// equal data size.
struct TypedArray {
  DType dtype = DType::uint8;
  std::vector<std::uint64_t> shape;
  Buffer data;

  /// Throws std::invalid_argument if the shape does not match the data size.
  TypedArray(DType dtype, std::vector<std::uint64_t> shape, Buffer data);

  template <typename T>
  static TypedArray from_vector(std::vector<T> values) {
    std::uint64_t n = values.size();
    auto holder = std::make_shared<std::vector<T>>(std::move(values));
    std::span<const std::byte> view(reinterpret_cast<const std::byte*>(holder->data()),
                                    holder->size() * sizeof(T));
    return TypedArray(dtype_of<T>(), {n}, Buffer(holder, view));
  }

  [[nodiscard]] std::uint64_t element_count() const noexcept;
  [[nodiscard]] std::size_t byte_size() const noexcept { return data.size(); }

  template <typename T> [[nodiscard]] std::span<const T> as() const {
    return {reinterpret_cast<const T*>(data.data()), data.size() / sizeof(T)};
  }
};

/// Opaque byte block.
struct Blob {
  Buffer data;
};

/// Tree-structured dynamic value: scalars, strings, byte blocks, typed arrays,
/// sequences and string-keyed maps.
class Value {
 public:
  using Sequence = std::vector<Value>;
  using Map = std::map<std::string, Value, std::less<>>;
  using Storage = std::variant<std::monostate, bool, std::int64_t, double, std::string, Blob,
                               TypedArray, Sequence, Map>;

  Value() = default;
  Value(std::nullptr_t) {}
  Value(bool v) : storage_(v) {}
  Value(int v) : storage_(std::int64_t{v}) {}
  Value(std::int64_t v) : storage_(v) {}
  Value(double v) : storage_(v) {}
  Value(const char* v) : storage_(std::string(v)) {}
  Value(std::string v) : storage_(std::move(v)) {}
  Value(Blob v) : storage_(std::move(v)) {}
  Value(TypedArray v) : storage_(std::move(v)) {}
  Value(Sequence v) : storage_(std::move(v)) {}
  Value(Map v) : storage_(std::move(v)) {}

  [[nodiscard]] const Storage& storage() const noexcept { return storage_; }
  Storage& storage() noexcept { return storage_; }

  template <typename T> [[nodiscard]] bool is() const noexcept { return std::holds_alternative<T>(storage_); }
  template <typename T> [[nodiscard]] const T& as() const { return std::get<T>(storage_); }
  template <typename T> T& as() { return std::get<T>(storage_); }

  [[nodiscard]] bool is_null() const noexcept { return is<std::monostate>(); }

  /// Structural equality; doubles compare bitwise, buffers by content.
  friend bool operator==(const Value& a, const Value& b);

 private:
  Storage storage_;
};

enum class SerializationStrategy { in_band, out_of_band, recursive };

/// Threshold at or above which byte blocks and typed arrays travel as
/// out-of-band segments.
inline constexpr std::size_t kDefaultOutOfBandFloor = 4096;
inline constexpr std::uint8_t kSchemaVersion = 1;

struct SerdeOptions {
  std::size_t out_of_band_floor = kDefaultOutOfBandFloor;

  static SerdeOptions force_in_band() { return {SIZE_MAX}; }
  static SerdeOptions force_out_of_band() { return {0}; }
};

SerializationStrategy classify(const Value& v, const SerdeOptions& opts = {});

/// In-band structural stream plus ordered out-of-band segments. Segments
/// alias the serialized value's buffers.
struct SerializedPayload {
  std::uint8_t version = kSchemaVersion;
  Buffer inband;
  std::vector<Buffer> segments;

  [[nodiscard]] std::size_t segment_bytes() const noexcept;
  /// Size of version | inband length | inband | segment count | segment lengths.
  [[nodiscard]] std::size_t header_size() const noexcept;
  /// header_size() plus every segment, i.e. the inline wire size.
  [[nodiscard]] std::size_t encoded_size() const noexcept;
};

/// Throws Error(unsupported_type) for values that cannot be encoded.
SerializedPayload serialize(const Value& v, const SerdeOptions& opts = {});

/// Throws Error(truncated | segment_mismatch | unknown_schema | malformed).
/// Out-of-band arrays come back as views over the payload's segments.
Value deserialize(const SerializedPayload& payload);

/// Payload wire header (bit-exact):
///   version u8 | inband length u32 LE | inband | segment count u16 LE |
///   segment length u64 LE per segment
void write_payload_header(const SerializedPayload& payload, std::span<std::byte> out);
std::vector<std::byte> encode_payload_header(const SerializedPayload& payload);

/// Header followed by the segment bytes back to back.
std::vector<std::byte> encode_inline(const SerializedPayload& payload);

struct PayloadHeader {
  std::uint8_t version = 0;
  std::span<const std::byte> inband;
  std::vector<std::uint64_t> segment_lengths;
  std::size_t size = 0;  // bytes consumed by the header
};

/// Parses just the header. Throws like deserialize().
PayloadHeader parse_payload_header(std::span<const std::byte> bytes);

/// Inverse of encode_inline; the result views into `wire`.
SerializedPayload decode_inline(const Buffer& wire);

/// Instrumentation: bytes the serializer and deserializer memcpy'd on this
/// thread since the last reset.
struct SerdeCounters {
  std::uint64_t bytes_copied = 0;
};
SerdeCounters& serde_counters() noexcept;

enum class ThroughputMode { in_band, out_of_band };

struct Throughput {
  double serialize_mb_per_s = 0;
  double deserialize_mb_per_s = 0;
};

/// Median throughput (MiB/s) serializing and deserializing a float64 array of
/// `size_bytes` under a forced strategy. Requires size_bytes >= 1024.
Throughput measure_throughput(std::size_t size_bytes, ThroughputMode mode, int iterations);

}  // namespace hprm

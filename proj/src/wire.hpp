#pragma once

// Little-endian body builders shared by the daemons and runtimes.

#include "hprm/error.hpp"

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hprm::wire {

class Writer {
 public:
  template <typename T> Writer& put(T v) {
    auto u = static_cast<std::uint64_t>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::byte>((u >> (8 * i)) & 0xFF));
    return *this;
  }
  Writer& raw(std::span<const std::byte> bytes) {
    out_.insert(out_.end(), bytes.begin(), bytes.end());
    return *this;
  }
  template <std::size_t N> Writer& raw(const std::array<std::uint8_t, N>& bytes) {
    for (auto b : bytes) out_.push_back(static_cast<std::byte>(b));
    return *this;
  }
  /// u16 length then bytes.
  Writer& str(std::string_view s) {
    put<std::uint16_t>(static_cast<std::uint16_t>(s.size()));
    raw(std::as_bytes(std::span(s.data(), s.size())));
    return *this;
  }

  [[nodiscard]] std::vector<std::byte>& bytes() noexcept { return out_; }
  std::vector<std::byte> take() noexcept { return std::move(out_); }

 private:
  std::vector<std::byte> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::byte> in) noexcept : in_(in) {}

  template <typename T> T get() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::uint64_t>(std::to_integer<std::uint8_t>(in_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  std::span<const std::byte> raw(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  template <std::size_t N> void raw_into(std::array<std::uint8_t, N>& out) {
    auto s = raw(N);
    std::memcpy(out.data(), s.data(), N);
  }
  std::string str() {
    auto n = get<std::uint16_t>();
    auto s = raw(n);
    return {reinterpret_cast<const char*>(s.data()), s.size()};
  }

  [[nodiscard]] std::size_t remaining() const noexcept { return in_.size() - pos_; }
  void expect_end() const {
    if (pos_ != in_.size()) throw Error(Errc::malformed, "trailing bytes in message body");
  }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw Error(Errc::malformed, "message body truncated");
  }

  std::span<const std::byte> in_;
  std::size_t pos_ = 0;
};

}  // namespace hprm::wire

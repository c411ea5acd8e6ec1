#pragma once

// Shared helpers for the test suites: a seeded generator and small builders.

#include "hprm/error.hpp"
#include "hprm/serde.hpp"
#include "hprm/tag.hpp"

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <unistd.h>

namespace hprm::test {

/// Seed from HPRM_TEST_SEED when set so a failing property run can be
/// replayed; otherwise a fixed default.
inline std::uint64_t seed() {
  if (const char* s = std::getenv("HPRM_TEST_SEED"); s && *s) return std::strtoull(s, nullptr, 10);
  return 0x5eed1234ULL;
}

class Rng {
 public:
  explicit Rng(std::uint64_t s = seed()) : gen_(s) {}

  std::int64_t range(std::int64_t lo, std::int64_t hi) { return std::uniform_int_distribution<std::int64_t>(lo, hi)(gen_); }
  std::uint64_t below(std::uint64_t n) { return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(gen_); }
  bool chance(double p) { return std::bernoulli_distribution(p)(gen_); }
  std::uint64_t bits() { return gen_(); }
  std::mt19937_64& engine() { return gen_; }

  /// Finite tags drawn from a small range so ties on time are common, with
  /// occasional extreme timestamps.
  Tag tag() {
    if (chance(0.05)) return Tag{chance(0.5) ? Tag::kMinTime + 1 : Tag::kMaxTime - 1, static_cast<Tag::Microstep>(below(3))};
    return Tag{range(-50, 50), static_cast<Tag::Microstep>(below(4))};
  }
  /// Any tag, sentinels included.
  Tag any_tag() {
    const auto k = below(20);
    if (k == 0) return Tag::never();
    if (k == 1) return Tag::forever();
    return tag();
  }

 private:
  std::mt19937_64 gen_;
};

/// Unique path under the temp dir for sockets and files.
inline std::string temp_path(const std::string& stem) {
  static int counter = 0;
  return (std::filesystem::temp_directory_path() /
          ("hprm-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" + stem))
      .string();
}

inline std::vector<std::byte> bytes_of(std::initializer_list<int> v) {
  std::vector<std::byte> out;
  for (int x : v) out.push_back(static_cast<std::byte>(x));
  return out;
}

/// FNV-1a, used as an independent content fingerprint.
inline std::uint64_t fnv1a(std::span<const std::byte> data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (auto b : data) {
    h ^= std::to_integer<std::uint8_t>(b);
    h *= 1099511628211ULL;
  }
  return h;
}

/// The error code `f` throws, or nullopt when it returns normally.
template <typename F> std::optional<Errc> errc_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace hprm::test

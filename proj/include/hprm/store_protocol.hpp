#pragma once

// Wire format between store clients and the daemon, over a local stream
// socket:
//   request  = op u8 | body length u32 LE | body
//   response = status u8 | body length u32 LE | body
// Status 0 is success; otherwise it is 1 + the Errc value and the body is
// the error text.

#include <cstdint>
#include <cstdlib>
#include <string>

namespace hprm::store_wire {

enum class Op : std::uint8_t {
  hello = 0,    // -> client id u64 | arena size u64 | capacity u64 | prefaulted u8 | name len u16 | name
  create = 1,   // id | size u64 -> offset u64 | size u64
  seal = 2,     // id | write passes u32 -> ()
  get = 3,      // id | timeout ns i64 -> offset u64 | size u64
  release = 4,  // id -> ()
  stats = 5,    // () -> ten u64 counters
  op_log = 6,   // from u64 -> count u32 | (seq u64 | op u8 | id | size u64 | client u64)*
  entry = 7,    // id -> present u8 | state u8 | size u64 | refs u32 | last access u64 | passes u32
  evict = 8,    // bytes u64 -> count u32 | id*
};

inline constexpr std::size_t kMessageHeader = 5;
inline constexpr std::uint32_t kMaxMessage = 1u << 26;

inline std::string default_socket_path() {
  if (const char* env = std::getenv("HPRM_STORE_PATH"); env != nullptr && *env != '\0') return env;
  return "/tmp/hprm-store.sock";
}

}  // namespace hprm::store_wire

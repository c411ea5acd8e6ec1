#include "hprm/log.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <string_view>
#include <unistd.h>

namespace hprm::log {

namespace {
std::atomic<Level> g_level{Level::warn};
std::mutex g_mutex;

const char* label(Level l) {
  switch (l) {
    case Level::trace: return "trace";
    case Level::debug: return "debug";
    case Level::info: return "info";
    case Level::warn: return "warn";
    case Level::error: return "error";
    case Level::off: return "off";
  }
  return "?";
}
}  // namespace

void set_level(Level l) noexcept { g_level.store(l, std::memory_order_relaxed); }

Level level() noexcept { return g_level.load(std::memory_order_relaxed); }

void init_from_env() {
  const char* env = std::getenv("HPRM_LOG");
  if (env == nullptr) return;
  std::string_view v(env);
  for (auto l : {Level::trace, Level::debug, Level::info, Level::warn, Level::error, Level::off}) {
    if (v == label(l)) set_level(l);
  }
}

void write(Level l, const std::string& message) {
  std::lock_guard lock(g_mutex);
  std::fprintf(stderr, "[hprm %s %d] %s\n", label(l), static_cast<int>(::getpid()), message.c_str());
}

}  // namespace hprm::log

#pragma once

#include <sstream>
#include <string>

namespace hprm::log {

enum class Level { trace = 0, debug, info, warn, error, off };

void set_level(Level level) noexcept;
Level level() noexcept;
/// Reads HPRM_LOG (trace|debug|info|warn|error|off) if set.
void init_from_env();
void write(Level level, const std::string& message);

template <typename... Args>
void emit(Level lvl, const Args&... args) {
  if (lvl < level()) return;
  std::ostringstream os;
  (os << ... << args);
  write(lvl, os.str());
}

template <typename... Args> void debug(const Args&... args) { emit(Level::debug, args...); }
template <typename... Args> void info(const Args&... args) { emit(Level::info, args...); }
template <typename... Args> void warn(const Args&... args) { emit(Level::warn, args...); }
template <typename... Args> void error(const Args&... args) { emit(Level::error, args...); }

}  // namespace hprm::log

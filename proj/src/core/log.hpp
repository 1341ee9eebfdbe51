#pragma once

#include <sstream>
#include <string>

namespace rp::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

/// Current threshold. Read once from RANK_PERTURB_LOG (error|warn|info|debug),
/// default warn.
Level threshold();
void set_threshold(Level level);
void write(Level level, const std::string& message);

template <typename... Args>
void emit(Level level, const Args&... args) {
  if (static_cast<int>(level) > static_cast<int>(threshold())) return;
  std::ostringstream os;
  (os << ... << args);
  write(level, os.str());
}

template <typename... Args>
void error(const Args&... args) { emit(Level::error, args...); }
template <typename... Args>
void warn(const Args&... args) { emit(Level::warn, args...); }
template <typename... Args>
void info(const Args&... args) { emit(Level::info, args...); }
template <typename... Args>
void debug(const Args&... args) { emit(Level::debug, args...); }

}  // namespace rp::log

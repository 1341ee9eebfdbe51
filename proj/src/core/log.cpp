#include "core/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string_view>

namespace rp::log {
namespace {

Level from_env() {
  const char* raw = std::getenv("RANK_PERTURB_LOG");
  if (raw == nullptr) return Level::warn;
  const std::string_view v(raw);
  if (v == "error") return Level::error;
  if (v == "info") return Level::info;
  if (v == "debug" || v == "trace") return Level::debug;
  return Level::warn;
}

std::atomic<int>& level_slot() {
  static std::atomic<int> slot{static_cast<int>(from_env())};
  return slot;
}

const char* label(Level level) {
  switch (level) {
    case Level::error: return "error";
    case Level::warn: return "warn";
    case Level::info: return "info";
    case Level::debug: return "debug";
  }
  return "?";
}

}  // namespace

Level threshold() { return static_cast<Level>(level_slot().load(std::memory_order_relaxed)); }

void set_threshold(Level level) { level_slot().store(static_cast<int>(level)); }

void write(Level level, const std::string& message) {
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[rank-perturb " << label(level) << "] " << message << '\n';
}

}  // namespace rp::log

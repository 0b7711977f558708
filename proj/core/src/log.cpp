#include "tasc/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace tasc {

namespace {
std::atomic<int> g_level{static_cast<int>(LogLevel::Warn)};
std::mutex g_mutex;

const char* level_name(LogLevel level) {
  switch (level) {
    case LogLevel::Warn: return "warn";
    case LogLevel::Info: return "info";
    case LogLevel::Debug: return "debug";
    default: return "";
  }
}
}  // namespace

void set_log_level(LogLevel level) noexcept { g_level.store(static_cast<int>(level)); }

LogLevel log_level() noexcept { return static_cast<LogLevel>(g_level.load()); }

void log(LogLevel level, std::string_view message) {
  if (level == LogLevel::Quiet || static_cast<int>(level) > g_level.load()) return;
  std::lock_guard lock(g_mutex);
  std::cerr << "tasc [" << level_name(level) << "] " << message << '\n';
}

}  // namespace tasc

#ifndef TASC_LOG_HPP
#define TASC_LOG_HPP

#include <string_view>

namespace tasc {

enum class LogLevel { Quiet = 0, Warn = 1, Info = 2, Debug = 3 };

void set_log_level(LogLevel level) noexcept;
LogLevel log_level() noexcept;

/// Writes "tasc [level] message" to stderr when `level` is enabled.
void log(LogLevel level, std::string_view message);

}  // namespace tasc

#endif  // TASC_LOG_HPP

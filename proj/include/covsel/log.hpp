#pragma once

// Leveled logging to stderr, controlled by the COVSEL_LOG environment
// variable (error, warn, info, debug; default warn). Data outputs never go
// through here, so stdout stays clean for pipelines.

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>
#include <string_view>

#include "covsel/error.hpp"

namespace covsel {

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

namespace detail {

inline LogLevel parse_log_level(std::string_view text) {
  if (text == "error") return LogLevel::error;
  if (text == "warn") return LogLevel::warn;
  if (text == "info") return LogLevel::info;
  if (text == "debug") return LogLevel::debug;
  std::cerr << "covsel: warn: unrecognized COVSEL_LOG value '" << text
            << "', using 'warn'\n";
  return LogLevel::warn;
}

inline LogLevel& log_level_storage() {
  static LogLevel level = [] {
    const char* env = std::getenv("COVSEL_LOG");
    return env ? parse_log_level(env) : LogLevel::warn;
  }();
  return level;
}

inline std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}

inline constexpr std::string_view level_name(LogLevel level) {
  switch (level) {
    case LogLevel::error: return "error";
    case LogLevel::warn: return "warn";
    case LogLevel::info: return "info";
    case LogLevel::debug: return "debug";
  }
  return "?";
}

}  // namespace detail

inline LogLevel log_level() { return detail::log_level_storage(); }
inline void set_log_level(LogLevel level) { detail::log_level_storage() = level; }

template <class... Parts>
void log(LogLevel level, Parts&&... parts) {
  if (level > log_level()) return;
  std::string line = concat("covsel: ", detail::level_name(level), ": ",
                            std::forward<Parts>(parts)..., '\n');
  std::lock_guard<std::mutex> lock(detail::log_mutex());
  std::cerr << line;
}

template <class... Parts>
void log_error(Parts&&... parts) {
  log(LogLevel::error, std::forward<Parts>(parts)...);
}
template <class... Parts>
void log_warn(Parts&&... parts) {
  log(LogLevel::warn, std::forward<Parts>(parts)...);
}
template <class... Parts>
void log_info(Parts&&... parts) {
  log(LogLevel::info, std::forward<Parts>(parts)...);
}
template <class... Parts>
void log_debug(Parts&&... parts) {
  log(LogLevel::debug, std::forward<Parts>(parts)...);
}

}  // namespace covsel

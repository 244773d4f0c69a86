#pragma once

#include <charconv>
#include <cstdio>
#include <string>

#include "covsel/error.hpp"

namespace covsel {

// Shortest representation that parses back to the same double.
inline std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  require(ec == std::errc{}, "to_chars failed");
  return std::string(buf, ptr);
}

inline std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  return std::string(buf);
}

}  // namespace covsel

#pragma once

#include <charconv>
#include <string>
#include <system_error>

namespace appd {

/// Shortest round-trip decimal rendering; deterministic across runs.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace appd

#pragma once

#include <cstdio>
#include <string>

namespace lgv {

// Shortest round-trippable text for CSV cells.
inline std::string fmt_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace lgv

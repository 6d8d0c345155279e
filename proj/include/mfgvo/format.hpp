#pragma once

#include <cstdio>
#include <string>

namespace mfgvo {

/// Nine significant digits, "%.9g". Used for every human or CSV number.
inline std::string fmt9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

/// Round-trip precision, "%.17g", for values that are read back.
inline std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace mfgvo

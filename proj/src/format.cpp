#include "poolinfo/format.hpp"

#include <cstdio>

namespace poolinfo {

std::string format_g6(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

}  // namespace poolinfo

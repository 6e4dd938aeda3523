#pragma once

#include <string>

namespace poolinfo {

/// Shortest form with 6 significant digits, switching to scientific
/// notation below 1e-4 or at 1e6 and above: 0.999963, 1.23414e-05, 0.00292.
/// This is printf's %.6g, trailing zeros dropped.
std::string format_g6(double value);

}  // namespace poolinfo

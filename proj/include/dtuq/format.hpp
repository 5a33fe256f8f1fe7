#ifndef DTUQ_FORMAT_HPP
#define DTUQ_FORMAT_HPP

#include <cmath>
#include <cstdio>
#include <string>

namespace dtuq {

/// Shortest-independent text form of a real: 17 significant digits, so
/// parsing the text back yields the identical double.
inline std::string format_real(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

}  // namespace dtuq

#endif  // DTUQ_FORMAT_HPP

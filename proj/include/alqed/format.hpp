#pragma once

#include <charconv>
#include <cmath>
#include <string>
#include <system_error>

namespace alqed {

/// Shortest round-trip decimal form of a double. Locale independent, so
/// written files are byte-stable across runs.
inline std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buffer[32];
    auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    if (ec != std::errc{}) return "nan";
    return std::string(buffer, end);
}

}  // namespace alqed

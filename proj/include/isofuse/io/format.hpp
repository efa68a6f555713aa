#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace isofuse::io {

/// Shortest round-trip decimal form of a double; "nan" / "inf" spelled out.
inline std::string fmt(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

} // namespace isofuse::io

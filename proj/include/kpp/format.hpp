#pragma once

#include <cstdio>
#include <string>

namespace kpp {

/// Round-trip formatting for doubles in every exported file.
inline std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace kpp

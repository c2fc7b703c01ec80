#ifndef SYSTRAJ_CSV_HPP
#define SYSTRAJ_CSV_HPP

#include <cstdio>
#include <ostream>
#include <string>

namespace systraj {

/// Shortest-faithful decimal with 17 significant digits.
inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline void csv_cell(std::ostream& out, double x, bool first = false) {
    if (!first) out << ',';
    out << format_double(x);
}

} // namespace systraj

#endif

#pragma once

#include <string>

namespace shellvp {

/// Shortest decimal that parses back to the same double ("inf", "-inf", "nan" for non-finite).
std::string shortest(double x);

/// Parses a full decimal/exponent literal (also inf, +inf, -inf, nan).  Throws std::invalid_argument.
double parse_double(const std::string& text);

}  // namespace shellvp

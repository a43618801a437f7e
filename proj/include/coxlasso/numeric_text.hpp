#pragma once

#include <string>
#include <string_view>

namespace coxlasso {

// Shortest decimal form that parses back to exactly the same double
// (std::to_chars round-trip guarantee). Infinities come out as "inf"/"-inf".
// All text artifacts use this so that save/load cycles are bit exact.
std::string format_double(double v);

// Strict double parser. `what` names the field for the error message; throws
// std::runtime_error on trailing garbage or malformed input. Accepts
// "inf"/"-inf"/"nan" to mirror format_double.
double parse_double(std::string_view text, const std::string& what);

// Strict integer parsers with the same error convention.
long long parse_int(std::string_view text, const std::string& what);
unsigned long long parse_uint(std::string_view text, const std::string& what);

}  // namespace coxlasso

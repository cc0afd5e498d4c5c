#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>

namespace twinsim {

// Attribute/state scalar: 64-bit float, 64-bit integer, boolean or string.
using Value = std::variant<double, std::int64_t, bool, std::string>;

using ValueMap = std::map<std::string, Value>;

bool is_numeric(const Value& v);

// Numeric view of a value; raises NonNumericValue for bool/string.
double as_double(const Value& v);

std::string value_to_string(const Value& v);

}  // namespace twinsim

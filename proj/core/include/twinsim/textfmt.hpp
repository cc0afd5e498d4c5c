#pragma once

#include <string>

namespace twinsim {

// Shortest round-trip decimal form via std::to_chars; locale-free, so CSV
// and JSON output is byte-stable.
std::string fmt_double(double v);

}  // namespace twinsim

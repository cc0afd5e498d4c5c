#include "twinsim/textfmt.hpp"

#include <array>
#include <charconv>

namespace twinsim {

std::string fmt_double(double v) {
  std::array<char, 48> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  return std::string(buf.data(), ptr);
}

}  // namespace twinsim

#include "twinsim/value.hpp"

#include "twinsim/errors.hpp"
#include "twinsim/textfmt.hpp"

namespace twinsim {

bool is_numeric(const Value& v) {
  return std::holds_alternative<double>(v) || std::holds_alternative<std::int64_t>(v);
}

double as_double(const Value& v) {
  if (const double* d = std::get_if<double>(&v)) return *d;
  if (const std::int64_t* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  raise(Errc::NonNumericValue, "value is " + value_to_string(v));
}

std::string value_to_string(const Value& v) {
  struct Visitor {
    std::string operator()(double d) const { return fmt_double(d); }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(const std::string& s) const { return "\"" + s + "\""; }
  };
  return std::visit(Visitor{}, v);
}

}  // namespace twinsim

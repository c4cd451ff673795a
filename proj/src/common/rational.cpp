#include "taskalloc/common/rational.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "taskalloc/common/error.hpp"

namespace taskalloc {
namespace {

std::int64_t parse_int(std::string_view s, std::string_view whole) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw StructuralError("not a rational number: '" + std::string(whole) + "'");
  }
  return v;
}

}  // namespace

Rational parse_rational(std::string_view text) {
  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    const auto num = parse_int(text.substr(0, slash), text);
    const auto den = parse_int(text.substr(slash + 1), text);
    if (den == 0) throw StructuralError("zero denominator in '" + std::string(text) + "'");
    return Rational(num, den);
  }
  if (auto dot = text.find('.'); dot != std::string_view::npos) {
    auto int_part = text.substr(0, dot);
    auto frac_part = text.substr(dot + 1);
    if (frac_part.size() > 15) throw StructuralError("too many decimals in '" + std::string(text) + "'");
    bool negative = !int_part.empty() && int_part.front() == '-';
    if (negative) int_part.remove_prefix(1);
    const std::int64_t whole = int_part.empty() ? 0 : parse_int(int_part, text);
    std::int64_t scale = 1;
    for (std::size_t k = 0; k < frac_part.size(); ++k) scale *= 10;
    const std::int64_t frac = frac_part.empty() ? 0 : parse_int(frac_part, text);
    Rational r(whole * scale + frac, scale);
    return negative ? -r : r;
  }
  return Rational(parse_int(text, text));
}

Rational rational_from_json(const nlohmann::json& j) {
  if (j.is_number_integer()) return Rational(j.get<std::int64_t>());
  if (j.is_string()) return parse_rational(j.get<std::string>());
  if (j.is_number_float()) {
    const double d = j.get<double>();
    if (!std::isfinite(d)) throw StructuralError("non-finite number");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", d);
    std::string s(buf);
    if (s.find_first_of("eE") != std::string::npos) {
      std::snprintf(buf, sizeof buf, "%.12f", d);
      s = buf;
    }
    return parse_rational(s);
  }
  throw StructuralError("expected a number, got " + j.dump());
}

std::string to_string(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

nlohmann::json rational_to_json(const Rational& r) {
  if (r.denominator() == 1) return r.numerator();
  return to_string(r);
}

}  // namespace taskalloc

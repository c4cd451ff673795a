#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <boost/rational.hpp>
#include <nlohmann/json.hpp>

namespace taskalloc {

/// Compare only against Rational values: with Boost 1.74 under C++20, mixed
/// `rational == int` and `!=` recurse forever through rewritten operators.
using Rational = boost::rational<std::int64_t>;

/// Parses "7", "-3/4" or "0.125" exactly. Throws StructuralError otherwise.
Rational parse_rational(std::string_view text);

/// Accepts a JSON integer, a string understood by parse_rational, or a float
/// (converted through its shortest decimal representation).
Rational rational_from_json(const nlohmann::json& j);

/// "n" when the denominator is 1, "n/d" otherwise.
std::string to_string(const Rational& r);

nlohmann::json rational_to_json(const Rational& r);

inline double to_double(const Rational& r) {
  return boost::rational_cast<double>(r);
}

}  // namespace taskalloc

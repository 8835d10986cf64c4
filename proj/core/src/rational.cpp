//  Copyright 2026 The calmtier Authors
//
//  Licensed under the Apache License, Version 2.0 (the "License");
//  you may not use this file except in compliance with the License.
//  You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
//  Unless required by applicable law or agreed to in writing, software
//  distributed under the License is distributed on an "AS IS" BASIS,
//  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//  See the License for the specific language governing permissions and
//  limitations under the License.

#include "calmtier/rational.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>

namespace calmtier {

namespace {

std::int64_t parse_int(std::string_view text, std::string_view original) {
  std::int64_t value = 0;
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ValueError("not a rational: '" + std::string(original) + "'");
  }
  return value;
}

}  // namespace

Rational parse_rational(std::string_view text) {
  if (text.empty()) {
    throw ValueError("not a rational: ''");
  }
  if (const auto slash = text.find('/'); slash != std::string_view::npos) {
    const std::int64_t num = parse_int(text.substr(0, slash), text);
    const std::int64_t den = parse_int(text.substr(slash + 1), text);
    if (den == 0) {
      throw ValueError("zero denominator: '" + std::string(text) + "'");
    }
    return Rational(num, den);
  }
  if (const auto dot = text.find('.'); dot != std::string_view::npos) {
    const std::string_view whole = text.substr(0, dot);
    const std::string_view frac = text.substr(dot + 1);
    if (frac.empty() || frac.size() > 15) {
      throw ValueError("not a rational: '" + std::string(text) + "'");
    }
    const bool negative = !whole.empty() && whole.front() == '-';
    const std::int64_t whole_part =
        whole.empty() || whole == "-" ? 0 : parse_int(whole, text);
    const std::int64_t frac_part = parse_int(frac, text);
    if (frac_part < 0) {
      throw ValueError("not a rational: '" + std::string(text) + "'");
    }
    std::int64_t scale = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) scale *= 10;
    const Rational magnitude =
        Rational(std::llabs(whole_part)) + Rational(frac_part, scale);
    return negative ? -magnitude : magnitude;
  }
  return Rational(parse_int(text, text));
}

std::string format_rational(const Rational& r) {
  if (r.denominator() == 1) {
    return std::to_string(r.numerator());
  }
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

std::string format_fixed(const Rational& r, int decimals) {
  std::int64_t scale = 1;
  for (int i = 0; i < decimals; ++i) scale *= 10;
  const Rational scaled = r * scale;

  // Round half to even on the scaled value.
  std::int64_t quotient = scaled.numerator() / scaled.denominator();
  Rational remainder = scaled - quotient;
  if (remainder < 0) {
    quotient -= 1;
    remainder += 1;
  }
  const Rational half(1, 2);
  if (remainder > half || (remainder == half && quotient % 2 != 0)) {
    quotient += 1;
  }

  const bool negative = quotient < 0;
  std::uint64_t magnitude =
      negative ? static_cast<std::uint64_t>(-quotient) : quotient;
  std::string digits = std::to_string(magnitude % scale);
  digits.insert(digits.begin(), decimals - digits.size(), '0');

  std::string out = negative ? "-" : "";
  out += std::to_string(magnitude / scale);
  if (decimals > 0) {
    out += "." + digits;
  }
  return out;
}

std::string format_percent(const Rational& r, int decimals) {
  return format_fixed(r * 100, decimals) + "%";
}

}  // namespace calmtier

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

#ifndef CALMTIER_RATIONAL_HPP_
#define CALMTIER_RATIONAL_HPP_

#include <boost/rational.hpp>

#include <cstdint>
#include <string>
#include <string_view>

#include "calmtier/errors.hpp"

namespace calmtier {

// Exact arithmetic everywhere a verdict or a tax value depends on a
// comparison. Floats only appear at display boundaries.
using Rational = boost::rational<std::int64_t>;

inline double to_double(const Rational& r) {
  return static_cast<double>(r.numerator()) /
         static_cast<double>(r.denominator());
}

/// Parses "7", "-3/4", or a decimal literal like "2.3" into an exact value.
Rational parse_rational(std::string_view text);

/// Integral values print bare ("150"), everything else as "p/q".
std::string format_rational(const Rational& r);

/// Fixed-point decimal rendering with round-half-to-even at `decimals`.
std::string format_fixed(const Rational& r, int decimals);

/// Percentage rendering: format_fixed(r * 100, decimals) + "%".
std::string format_percent(const Rational& r, int decimals);

}  // namespace calmtier

#endif  // CALMTIER_RATIONAL_HPP_

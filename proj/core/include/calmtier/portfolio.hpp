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

#ifndef CALMTIER_PORTFOLIO_HPP_
#define CALMTIER_PORTFOLIO_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "calmtier/classifier.hpp"
#include "calmtier/rational.hpp"

namespace calmtier {

struct PortfolioRecord {
  std::string task_id;
  std::string category;
  Tier tier = Tier::NM;

  bool operator==(const PortfolioRecord&) const = default;
};

struct WilsonInterval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Fraction of uniform coordination spending that buys no correctness:
/// (1 - f) * (c - 1) / c for a portfolio with non-monotonic fraction f and
/// overhead multiplier c. Exact. Throws DomainError outside 0 <= f <= 1,
/// c > 1.
Rational coordination_tax(const Rational& f, const Rational& c);
double coordination_tax(double f, double c);

struct CostBreakdown {
  Rational uniform;    // n * c
  Rational selective;  // n * (1 - f + f*c)
  Rational tax;        // (uniform - selective) / uniform
};

/// The derivation form of the tax: uniform-minus-selective cost, normalized.
/// `tax` equals coordination_tax(f, c) identically.
CostBreakdown tax_from_costs(std::uint64_t n, const Rational& f,
                             const Rational& c);

/// Wilson score interval for k successes out of n at the given confidence.
WilsonInterval wilson_interval(std::uint64_t k, std::uint64_t n,
                               double confidence);

/// Non-monotonic fraction |NM| / n with its 95% Wilson interval. Tier M_O
/// counts as monotonic. Throws EmptyPortfolio.
std::pair<Rational, WilsonInterval> estimate_f(
    std::span<const PortfolioRecord> records);

struct CategorySummary {
  std::string category;
  std::uint64_t m = 0;
  std::uint64_t m_o = 0;
  std::uint64_t nm = 0;

  std::uint64_t total() const { return m + m_o + nm; }
  Rational monotonic_fraction() const {
    return Rational(m + m_o, total());
  }
};

struct PortfolioSummary {
  std::vector<CategorySummary> rows;  // % monotonic descending, then name
  CategorySummary totals;
};

PortfolioSummary summarize(std::span<const PortfolioRecord> records);

/// CSV with header `task_id,category,tier`; tier is M, M-O, or NM.
std::vector<PortfolioRecord> parse_portfolio_csv(const std::string& text);
std::vector<PortfolioRecord> load_portfolio_csv(
    const std::filesystem::path& path);
std::string portfolio_to_csv(std::span<const PortfolioRecord> records);

struct TaxReport {
  std::uint64_t n = 0;
  Rational f{0};
  WilsonInterval f_ci;
  Rational c_lo{0};
  Rational c_hi{0};     // equals c_lo for a point estimate
  Rational tax_lo{0};   // T at c_lo
  Rational tax_hi{0};   // T at c_hi
};

/// Tax over a c interval for an observed portfolio (or a given f with
/// n = 0 and a degenerate CI).
TaxReport build_tax_report(std::span<const PortfolioRecord> records,
                           const Rational& c_lo, const Rational& c_hi);
TaxReport build_tax_report(const Rational& f, const Rational& c_lo,
                           const Rational& c_hi);

}  // namespace calmtier

#endif  // CALMTIER_PORTFOLIO_HPP_

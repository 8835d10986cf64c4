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

#include "calmtier/portfolio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

namespace calmtier {

namespace {

void check_tax_domain(const Rational& f, const Rational& c) {
  if (f < Rational(0) || f > Rational(1)) {
    throw DomainError("non-monotonic fraction f must lie in [0, 1], got " +
                      format_rational(f));
  }
  if (c <= Rational(1)) {
    throw DomainError("overhead multiplier c must exceed 1, got " +
                      format_rational(c));
  }
}

}  // namespace

Rational coordination_tax(const Rational& f, const Rational& c) {
  check_tax_domain(f, c);
  return (Rational(1) - f) * (c - Rational(1)) / c;
}

double coordination_tax(double f, double c) {
  if (f < 0.0 || f > 1.0) {
    throw DomainError("non-monotonic fraction f must lie in [0, 1]");
  }
  if (c <= 1.0) {
    throw DomainError("overhead multiplier c must exceed 1");
  }
  return (1.0 - f) * (c - 1.0) / c;
}

CostBreakdown tax_from_costs(std::uint64_t n, const Rational& f,
                             const Rational& c) {
  check_tax_domain(f, c);
  if (n < 1) {
    throw DomainError("portfolio size n must be >= 1");
  }
  CostBreakdown out;
  const Rational size(static_cast<std::int64_t>(n));
  out.uniform = size * c;
  out.selective = size * (Rational(1) - f + f * c);
  out.tax = (out.uniform - out.selective) / out.uniform;
  return out;
}

WilsonInterval wilson_interval(std::uint64_t k, std::uint64_t n,
                               double confidence) {
  if (n < 1) {
    throw DomainError("wilson_interval needs n >= 1");
  }
  if (k > n) {
    throw DomainError("wilson_interval needs k <= n");
  }
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw DomainError("confidence level must lie in (0, 1)");
  }
  const boost::math::normal_distribution<double> normal;
  const double z =
      boost::math::quantile(normal, 1.0 - (1.0 - confidence) / 2.0);
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denominator = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denominator;
  const double halfwidth =
      (z / denominator) *
      std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  WilsonInterval interval;
  interval.lo = std::max(0.0, center - halfwidth);
  interval.hi = std::min(1.0, center + halfwidth);
  return interval;
}

std::pair<Rational, WilsonInterval> estimate_f(
    std::span<const PortfolioRecord> records) {
  if (records.empty()) {
    throw EmptyPortfolio("estimate_f over an empty portfolio");
  }
  std::uint64_t nm = 0;
  for (const auto& record : records) {
    if (record.tier == Tier::NM) nm += 1;
  }
  const Rational f(static_cast<std::int64_t>(nm),
                   static_cast<std::int64_t>(records.size()));
  return {f, wilson_interval(nm, records.size(), 0.95)};
}

PortfolioSummary summarize(std::span<const PortfolioRecord> records) {
  if (records.empty()) {
    throw EmptyPortfolio("summarize over an empty portfolio");
  }
  std::map<std::string, CategorySummary> by_category;
  PortfolioSummary summary;
  summary.totals.category = "Total";
  for (const auto& record : records) {
    CategorySummary& row = by_category[record.category];
    row.category = record.category;
    switch (record.tier) {
      case Tier::M:
        row.m += 1;
        summary.totals.m += 1;
        break;
      case Tier::M_O:
        row.m_o += 1;
        summary.totals.m_o += 1;
        break;
      case Tier::NM:
        row.nm += 1;
        summary.totals.nm += 1;
        break;
    }
  }
  for (auto& [_, row] : by_category) {
    summary.rows.push_back(row);
  }
  std::sort(summary.rows.begin(), summary.rows.end(),
            [](const CategorySummary& a, const CategorySummary& b) {
              const Rational fa = a.monotonic_fraction();
              const Rational fb = b.monotonic_fraction();
              if (fa != fb) return fa > fb;
              return a.category < b.category;
            });
  return summary;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

Tier parse_tier(const std::string& text, std::size_t line) {
  if (text == "M") return Tier::M;
  if (text == "M-O" || text == "M_O") return Tier::M_O;
  if (text == "NM") return Tier::NM;
  throw SchemaError("line " + std::to_string(line) + ": unknown tier '" +
                    text + "'");
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream stream(line);
  while (std::getline(stream, field, ',')) {
    fields.push_back(field);
  }
  if (!line.empty() && line.back() == ',') {
    fields.push_back("");
  }
  return fields;
}

}  // namespace

std::vector<PortfolioRecord> parse_portfolio_csv(const std::string& text) {
  std::istringstream stream(text);
  std::string line;
  std::size_t line_number = 0;
  std::vector<PortfolioRecord> records;
  while (std::getline(stream, line)) {
    line_number += 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_number == 1) {
      if (line != "task_id,category,tier") {
        throw SchemaError("portfolio CSV must start with header "
                          "'task_id,category,tier'");
      }
      continue;
    }
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != 3) {
      throw SchemaError("line " + std::to_string(line_number) +
                        ": expected 3 fields, got " +
                        std::to_string(fields.size()));
    }
    records.push_back(
        {fields[0], fields[1], parse_tier(fields[2], line_number)});
  }
  return records;
}

std::vector<PortfolioRecord> load_portfolio_csv(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw SchemaError("cannot read portfolio '" + path.string() + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_portfolio_csv(buffer.str());
}

std::string portfolio_to_csv(std::span<const PortfolioRecord> records) {
  std::string out = "task_id,category,tier\n";
  for (const auto& record : records) {
    out += record.task_id + "," + record.category + "," +
           tier_display(record.tier) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// tax reports

TaxReport build_tax_report(const Rational& f, const Rational& c_lo,
                           const Rational& c_hi) {
  if (c_hi < c_lo) {
    throw DomainError("c range upper bound below lower bound");
  }
  TaxReport report;
  report.f = f;
  report.f_ci = {to_double(f), to_double(f)};
  report.c_lo = c_lo;
  report.c_hi = c_hi;
  report.tax_lo = coordination_tax(f, c_lo);
  report.tax_hi = coordination_tax(f, c_hi);
  return report;
}

TaxReport build_tax_report(std::span<const PortfolioRecord> records,
                           const Rational& c_lo, const Rational& c_hi) {
  const auto [f, interval] = estimate_f(records);
  TaxReport report = build_tax_report(f, c_lo, c_hi);
  report.n = records.size();
  report.f_ci = interval;
  return report;
}

}  // namespace calmtier

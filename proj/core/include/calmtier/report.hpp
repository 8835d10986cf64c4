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

#ifndef CALMTIER_REPORT_HPP_
#define CALMTIER_REPORT_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "calmtier/classifier.hpp"
#include "calmtier/engine.hpp"
#include "calmtier/portfolio.hpp"

namespace calmtier {

/// Bundled-data directory: $CALMTIER_DATA when set, the built-in location
/// otherwise.
std::filesystem::path default_data_dir();

/// The ten bundled workflow ids, in report order.
const std::vector<std::string>& bundled_task_ids();

TaskSpec load_bundled_task(const std::filesystem::path& data_dir,
                           const std::string& task_id);

struct ReportOptions {
  std::filesystem::path data_dir = default_data_dir();
  std::uint64_t seed = 0;
  bool tax_only = false;
};

struct SimulationRow {
  std::string task_id;
  Tier tier = Tier::NM;
  std::map<ScheduleMode, ModeSummary> by_mode;
  Rational c_ratio{0};
};

struct ClassificationRow {
  std::string task_id;
  Classification classification;
};

struct TaxRow {
  std::string corpus;
  Rational f{0};
  Rational c_lo{0};
  Rational c_hi{0};
  Rational tax_lo{0};
  Rational tax_hi{0};
};

/// Everything the reproduction run produces. Output is byte-stable for a
/// fixed tool version: fixed seeds, sorted tables, no wall-clock anywhere.
struct ReportBundle {
  std::vector<ClassificationRow> classification;
  std::vector<SimulationRow> simulation;
  PortfolioSummary portfolio;
  Rational portfolio_f{0};
  WilsonInterval portfolio_f_ci;
  std::uint64_t onet_monotonic = 0;
  std::uint64_t onet_total = 0;
  WilsonInterval onet_ci;
  std::vector<TaxRow> tax;
  std::uint64_t seed = 0;
  bool tax_only = false;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

/// Classifies the bundled suite, enumerates it exhaustively in all three
/// modes, summarizes the bundled portfolio, and evaluates the tax grid.
ReportBundle reproduce(const ReportOptions& options);

}  // namespace calmtier

#endif  // CALMTIER_REPORT_HPP_

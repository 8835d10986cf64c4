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
//
// calmtier — classify multi-agent workflows by coordination need, simulate
// them under uncoordinated / causal / orchestrated scheduling, and compute
// the avoidable share of coordination spending.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "calmtier/classifier.hpp"
#include "calmtier/engine.hpp"
#include "calmtier/portfolio.hpp"
#include "calmtier/report.hpp"
#include "calmtier/task.hpp"
#include "calmtier/version.hpp"

namespace {

using json = nlohmann::json;
using namespace calmtier;

void write_output(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) {
    throw Error("cannot write '" + out_path + "'");
  }
  out << text;
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

// -- classify ---------------------------------------------------------------

int cmd_classify(const std::vector<std::string>& paths,
                 const std::string& format, const std::string& out_path) {
  json results = json::array();
  std::string text;
  std::optional<Tier> worst;

  for (const auto& path : paths) {
    const TaskSpec spec = load_task_file(path);
    const Classification classification = classify(spec);
    if (!worst ||
        tier_exit_code(classification.tier) > tier_exit_code(*worst)) {
      worst = classification.tier;
    }
    if (format == "json") {
      json tests = json::array();
      for (const auto& test : classification.evidence) {
        tests.push_back(json{{"test", heuristic_test_name(test.test)},
                             {"fired", test.fired},
                             {"detail", test.detail}});
      }
      results.push_back(
          json{{"file", path},
               {"task", spec.id},
               {"tier", tier_name(classification.tier)},
               {"thompson", thompson_name(classification.inferred_thompson)},
               {"defaulted", classification.defaulted},
               {"tests", std::move(tests)}});
    } else {
      text += path + " (" + spec.id + ")\n" + explain(classification) + "\n";
    }
  }

  if (format == "json") {
    write_output(dump(json{{"schema", kSchemaVersion}, {"results", results}}),
                 out_path);
  } else {
    write_output(text, out_path);
  }
  return worst ? tier_exit_code(*worst) : 0;
}

// -- simulate -----------------------------------------------------------------

int cmd_simulate(const std::string& task_path, const std::string& mode_name,
                 std::size_t runs, bool exhaustive,
                 const std::string& partition_path, std::uint64_t seed,
                 const std::string& out_path) {
  const TaskSpec spec = load_task_file(task_path);

  std::vector<ScheduleMode> modes;
  if (mode_name == "all") {
    modes = {ScheduleMode::Uncoordinated, ScheduleMode::Causal,
             ScheduleMode::Orchestrated};
  } else {
    modes = {schedule_mode_from_name(mode_name)};
  }

  PartitionPlan plan;
  if (!partition_path.empty()) {
    plan = PartitionPlan::load_file(partition_path);
  }

  json all_runs = json::array();
  json summaries = json::object();
  std::map<ScheduleMode, ModeSummary> by_mode;
  for (const ScheduleMode mode : modes) {
    std::vector<RunResult> results;
    if (!plan.empty()) {
      for (std::uint64_t i = 0; i < runs; ++i) {
        results.push_back(inject_partition(spec, mode, plan, seed + i));
      }
    } else if (exhaustive) {
      results = enumerate_runs(spec, mode, runs);
    } else {
      for (std::uint64_t i = 0; i < runs; ++i) {
        results.push_back(run(spec, mode, seed + i));
      }
    }
    const ModeSummary summary = summarize_runs(results);
    by_mode[mode] = summary;
    for (const auto& result : results) {
      all_runs.push_back(result.to_json());
    }
    summaries[schedule_mode_name(mode)] =
        json{{"runs", summary.runs},
             {"valid", summary.valid},
             {"validity", format_percent(summary.validity_rate, 1)},
             {"mean_cost", format_fixed(summary.mean_cost, 2)}};
  }

  json doc{{"schema", kSchemaVersion},
           {"task", spec.id},
           {"runs", std::move(all_runs)},
           {"summary", std::move(summaries)}};
  if (mode_name == "all") {
    const Rational c_ratio =
        by_mode.at(ScheduleMode::Orchestrated).mean_cost /
        by_mode.at(ScheduleMode::Uncoordinated).mean_cost;
    doc["summary"]["c_ratio"] = format_fixed(c_ratio, 2);
  }
  write_output(dump(doc), out_path);
  return 0;
}

// -- tax ----------------------------------------------------------------------

int cmd_tax(const std::string& portfolio_path, const std::string& f_text,
            const std::string& c_text, const std::string& c_range,
            const std::string& format, const std::string& out_path) {
  Rational c_lo(23, 10);
  Rational c_hi(44, 10);
  if (!c_text.empty()) {
    c_lo = c_hi = parse_rational(c_text);
  } else if (!c_range.empty()) {
    const auto colon = c_range.find(':');
    if (colon == std::string::npos) {
      throw ValueError("--c-range expects lo:hi");
    }
    c_lo = parse_rational(c_range.substr(0, colon));
    c_hi = parse_rational(c_range.substr(colon + 1));
  }

  TaxReport report;
  if (!portfolio_path.empty()) {
    const std::vector<PortfolioRecord> records =
        load_portfolio_csv(portfolio_path);
    report = build_tax_report(records, c_lo, c_hi);
  } else if (!f_text.empty()) {
    report = build_tax_report(parse_rational(f_text), c_lo, c_hi);
  } else {
    throw ValueError("tax needs --portfolio or --f");
  }

  const bool range = report.c_lo != report.c_hi;
  if (format == "json") {
    json doc{{"schema", kSchemaVersion},
             {"n", report.n},
             {"f", format_rational(report.f)},
             {"f_pct", format_percent(report.f, 1)},
             {"c_lo", format_fixed(report.c_lo, 1)},
             {"c_hi", format_fixed(report.c_hi, 1)},
             {"tax_lo", format_percent(report.tax_lo, 0)},
             {"tax_lo_exact", format_rational(report.tax_lo)},
             {"tax_hi", format_percent(report.tax_hi, 0)},
             {"tax_hi_exact", format_rational(report.tax_hi)}};
    if (report.n > 0) {
      char lo[32], hi[32];
      std::snprintf(lo, sizeof(lo), "%.3f", report.f_ci.lo);
      std::snprintf(hi, sizeof(hi), "%.3f", report.f_ci.hi);
      doc["f_ci_lo"] = lo;
      doc["f_ci_hi"] = hi;
    }
    write_output(dump(doc), out_path);
  } else if (format == "csv") {
    std::string text = "f,c,tax\n";
    text += format_fixed(report.f, 4) + "," + format_fixed(report.c_lo, 2) +
            "," + format_fixed(report.tax_lo, 4) + "\n";
    if (range) {
      text += format_fixed(report.f, 4) + "," + format_fixed(report.c_hi, 2) +
              "," + format_fixed(report.tax_hi, 4) + "\n";
    }
    write_output(text, out_path);
  } else {
    std::string text;
    if (report.n > 0) {
      text += "portfolio: " + std::to_string(report.n) + " tasks, f = " +
              format_rational(report.f) + " (" +
              format_percent(report.f, 1) + ")\n";
    } else {
      text += "f = " + format_rational(report.f) + " (" +
              format_percent(report.f, 1) + ")\n";
    }
    if (range) {
      text += "c range: " + format_fixed(report.c_lo, 1) + " - " +
              format_fixed(report.c_hi, 1) + "\n";
      text += "coordination tax: " + format_percent(report.tax_lo, 0) +
              " - " + format_percent(report.tax_hi, 0) + "\n";
    } else {
      text += "c = " + format_fixed(report.c_lo, 1) + "\n";
      text += "coordination tax: " + format_percent(report.tax_lo, 0) + "\n";
    }
    write_output(text, out_path);
  }
  return 0;
}

// -- reproduce ------------------------------------------------------------------

int cmd_reproduce(const ReportOptions& options, const std::string& format,
                  const std::string& out_path) {
  const ReportBundle bundle = reproduce(options);
  if (!out_path.empty()) {
    // --out acts as a prefix; both renderings are written.
    write_output(bundle.to_text(), out_path + ".txt");
    write_output(dump(bundle.to_json()), out_path + ".json");
    return 0;
  }
  if (format == "json") {
    write_output(dump(bundle.to_json()), "");
  } else {
    write_output(bundle.to_text(), "");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coordination-tier classifier, simulator, and tax calculator"};
  app.set_version_flag("--version", std::string("calmtier ") + kVersion);
  app.require_subcommand(1);

  std::string format = "text";
  std::string out_path;
  std::uint64_t seed = 0;
  std::string data_dir;
  app.add_option("--format", format, "text or json")
      ->check(CLI::IsMember({"text", "json", "csv"}));
  app.add_option("--out", out_path, "write output to a file");
  app.add_option("--seed", seed, "base seed for sampled schedules");
  app.add_option("--data", data_dir,
                 "bundled-data directory (default: $CALMTIER_DATA)");

  auto* classify_cmd =
      app.add_subcommand("classify", "tier a task spec (exit 0=M 10=M-O 20=NM)");
  std::vector<std::string> classify_paths;
  classify_cmd->add_option("paths", classify_paths, "task JSON files")
      ->required();

  auto* simulate_cmd =
      app.add_subcommand("simulate", "run a task under a scheduling regime");
  std::string task_path;
  std::string mode_name = "all";
  std::size_t runs = 10;
  bool exhaustive = false;
  std::string partition_path;
  simulate_cmd->add_option("--task", task_path, "task JSON file")->required();
  simulate_cmd->add_option("--mode", mode_name,
                           "uncoordinated|causal|orchestrated|all");
  simulate_cmd->add_option("--runs", runs, "sampled schedules per mode");
  simulate_cmd->add_flag("--exhaustive", exhaustive,
                         "enumerate all interleavings when small enough");
  simulate_cmd->add_option("--partition", partition_path,
                           "partition plan JSON file");

  auto* tax_cmd =
      app.add_subcommand("tax", "avoidable share of coordination spending");
  std::string portfolio_path;
  std::string f_text;
  std::string c_text;
  std::string c_range;
  tax_cmd->add_option("--portfolio", portfolio_path,
                      "portfolio CSV (task_id,category,tier)");
  tax_cmd->add_option("--f", f_text, "non-monotonic fraction in [0,1]");
  tax_cmd->add_option("--c", c_text, "overhead multiplier > 1");
  tax_cmd->add_option("--c-range", c_range,
                      "overhead range lo:hi (default 2.3:4.4)");

  auto* reproduce_cmd = app.add_subcommand(
      "reproduce", "classify + exhaustively simulate the bundled suite");
  bool tax_only = false;
  reproduce_cmd->add_flag("--tax-only", tax_only,
                          "emit only the tax and portfolio blocks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);  // --help / --version
    }
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (classify_cmd->parsed()) {
      const std::string effective_format = format == "csv" ? "text" : format;
      return cmd_classify(classify_paths, effective_format, out_path);
    }
    if (simulate_cmd->parsed()) {
      return cmd_simulate(task_path, mode_name, runs, exhaustive,
                          partition_path, seed, out_path);
    }
    if (tax_cmd->parsed()) {
      return cmd_tax(portfolio_path, f_text, c_text, c_range, format,
                     out_path);
    }
    if (reproduce_cmd->parsed()) {
      ReportOptions options;
      if (!data_dir.empty()) options.data_dir = data_dir;
      options.seed = seed;
      options.tax_only = tax_only;
      return cmd_reproduce(options, format, out_path);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

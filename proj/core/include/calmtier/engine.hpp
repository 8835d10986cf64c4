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
// Deterministic discrete-event execution of a TaskSpec under three
// scheduling regimes. Virtual tick time only; a run is a pure function of
// (spec, mode, schedule).
//
//   Uncoordinated — agents activate in schedule order with whatever inputs
//       have arrived, possibly none; outputs merge mechanically.
//   Causal        — an agent is deferred until every handoff predecessor's
//       output has been delivered to it (vector-clock gated).
//   Orchestrated  — a central orchestrator plans, assigns, relays handoffs,
//       trims resource over-allocation, and reviews before commit.

#ifndef CALMTIER_ENGINE_HPP_
#define CALMTIER_ENGINE_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "calmtier/lattice.hpp"
#include "calmtier/task.hpp"

namespace calmtier {

enum class ScheduleMode { Uncoordinated, Causal, Orchestrated };

std::string schedule_mode_name(ScheduleMode mode);
ScheduleMode schedule_mode_from_name(const std::string& name);

/// Component-wise counter map over subtask ids; merge is pointwise max.
struct VectorClock {
  std::map<std::string, std::uint64_t> stamps;

  void merge(const VectorClock& other);
  void advance(const std::string& id);
  bool dominates(const VectorClock& other) const;

  bool operator==(const VectorClock&) const = default;
};

/// Half-open tick interval during which messages to `blocked` agents are
/// held back. Finite by construction, so delivery stays eventual.
struct PartitionWindow {
  std::uint64_t start = 0;
  std::uint64_t end = 0;
  std::set<std::string> blocked;

  bool operator==(const PartitionWindow&) const = default;
};

struct PartitionPlan {
  std::vector<PartitionWindow> windows;

  bool empty() const { return windows.empty(); }

  nlohmann::json to_json() const;
  static PartitionPlan from_json(const nlohmann::json& j);
  static PartitionPlan load_file(const std::filesystem::path& path);
};

/// One schedulable message event. Every subtask has one Output event; every
/// feedback edge adds a FeedbackMsg (downstream comment reaches upstream)
/// and a FollowUp (upstream reacts).
struct ScheduledEvent {
  enum class Type { Output, FeedbackMsg, FollowUp };

  Type type = Type::Output;
  std::string subtask;          // Output: the emitting subtask
  std::size_t feedback = 0;     // FeedbackMsg / FollowUp: edge index

  bool operator==(const ScheduledEvent&) const = default;
};

struct Schedule {
  std::vector<ScheduledEvent> order;   // delivery/activation priority
  std::vector<std::uint64_t> delays;   // per-event extra ticks, aligned
  PartitionPlan partitions;
};

/// Number of message events an interleaving permutes.
std::size_t message_event_count(const TaskSpec& spec);

Schedule default_schedule(const TaskSpec& spec);
Schedule seeded_schedule(const TaskSpec& spec, std::uint64_t seed);
/// All permutations of the event list, lexicographic. Callers should check
/// message_event_count first; 6 events is already 720 schedules.
std::vector<Schedule> exhaustive_schedules(const TaskSpec& spec);

struct TraceEvent {
  std::uint64_t tick = 0;
  std::string type;    // send | deliver | activate | trim | review-drop
  std::string actor;
  std::string detail;

  bool operator==(const TraceEvent&) const = default;
};

enum class Verdict { Valid, Invalid };

std::string verdict_name(Verdict v);

/// Merged run output: a single lattice value when every contribution shares
/// one joinable kind, otherwise a composite keyed by contributor.
class FinalOutput {
 public:
  using Composite = std::map<std::string, LatticeValue>;

  FinalOutput() : value_(Composite{}) {}
  explicit FinalOutput(LatticeValue merged) : value_(std::move(merged)) {}
  explicit FinalOutput(Composite parts) : value_(std::move(parts)) {}

  bool is_merged() const {
    return std::holds_alternative<LatticeValue>(value_);
  }
  const LatticeValue& merged() const { return std::get<LatticeValue>(value_); }
  const Composite& composite() const { return std::get<Composite>(value_); }

  /// Every lattice value in the output, for predicate evaluation.
  std::vector<const LatticeValue*> members() const;

  bool operator==(const FinalOutput&) const = default;

  nlohmann::json to_json() const;

 private:
  std::variant<LatticeValue, Composite> value_;
};

struct RunResult {
  ScheduleMode mode = ScheduleMode::Uncoordinated;
  std::uint64_t seed = 0;
  FinalOutput final_output;
  Verdict verdict = Verdict::Invalid;
  std::string verdict_reason;
  std::uint64_t messages_total = 0;
  std::uint64_t messages_coordination = 0;
  std::uint64_t cost_units = 0;
  std::vector<TraceEvent> trace;

  nlohmann::json to_json() const;
};

/// Executes one run under a seeded schedule. Reproducible bit-for-bit for
/// the same (spec, mode, seed). Throws ScriptMissing when a subtask has no
/// script; merge conflicts surface as INVALID verdicts, never as errors.
RunResult run(const TaskSpec& spec, ScheduleMode mode, std::uint64_t seed);

RunResult run_with_schedule(const TaskSpec& spec, ScheduleMode mode,
                            const Schedule& schedule, std::uint64_t seed = 0);

/// Exhaustive when message_event_count(spec) <= 6, otherwise `limit` seeded
/// samples (seeds 0..limit-1).
std::vector<RunResult> enumerate_runs(const TaskSpec& spec, ScheduleMode mode,
                                      std::size_t limit);

/// Binary validity of a final output against the spec's predicate, after
/// checking merge integrity (exclusive-register conflicts, surviving
/// retracted revisions). No partial credit.
std::pair<Verdict, std::string> evaluate(const TaskSpec& spec,
                                         const FinalOutput& output);

/// Mean orchestrated cost over mean uncoordinated cost, exact. > 1 for any
/// spec with at least one subtask. Throws DomainError on an empty spec or
/// repetitions = 0.
Rational measure_c(const TaskSpec& spec, std::size_t repetitions);

/// run() with messages to blocked agents deferred until their window ends.
RunResult inject_partition(const TaskSpec& spec, ScheduleMode mode,
                           const PartitionPlan& plan, std::uint64_t seed);

struct ModeSummary {
  std::size_t runs = 0;
  std::size_t valid = 0;
  Rational validity_rate{0};
  Rational mean_cost{0};
};

ModeSummary summarize_runs(const std::vector<RunResult>& results);

}  // namespace calmtier

#endif  // CALMTIER_ENGINE_HPP_

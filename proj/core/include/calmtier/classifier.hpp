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

#ifndef CALMTIER_CLASSIFIER_HPP_
#define CALMTIER_CLASSIFIER_HPP_

#include <string>
#include <vector>

#include "calmtier/task.hpp"

namespace calmtier {

/// Coordination tier.
///   M    — coordination-free: merge via join in any order.
///   M_O  — coordination-free under causal delivery.
///   NM   — coordination required for correctness.
enum class Tier { M, M_O, NM };

enum class HeuristicTest {
  Retraction,
  SharedResourceNegation,
  OrderSensitivity,
  FeedbackKind,
  MergeConflict,
};

struct TestResult {
  HeuristicTest test;
  bool fired = false;
  std::string detail;  // names the offending element; non-empty when fired
};

struct Classification {
  Tier tier = Tier::NM;
  Thompson inferred_thompson = Thompson::Pooled;
  std::vector<TestResult> evidence;  // always the five tests, fixed order
  bool defaulted = false;            // borderline rules forced NM
  std::string default_detail;        // what was missing, when defaulted
};

/// Tier decision procedure. Pure: the same spec yields an identical
/// Classification, evidence order included.
///
///   1. retractive emission or exclusive_assign output  -> NM
///   2. shared resource with worst-case demand > capacity -> NM
///   3. retractive feedback edge                         -> NM
///   4. else handoff / additive feedback / causal_append -> M_O
///   5. else                                             -> M
///
/// A subtask missing its emission or output kind is borderline and defaults
/// the spec to NM. Throws InvalidSpec when validate_graph reports anything.
Classification classify(const TaskSpec& spec);

/// The interdependence-to-tier mapping on labels alone. Sequential
/// with feedback cannot be resolved without the feedback kind; asking for
/// it throws AmbiguousLabel.
Tier bridge_map(Thompson label);

/// Deterministic plain-text account of a classification.
std::string explain(const Classification& classification);

std::string tier_name(Tier tier);        // "M" / "M_O" / "NM"
std::string tier_display(Tier tier);     // "M" / "M-O" / "NM" (tables, CSV)
int tier_exit_code(Tier tier);           // 0 / 10 / 20
std::string heuristic_test_name(HeuristicTest test);

}  // namespace calmtier

#endif  // CALMTIER_CLASSIFIER_HPP_

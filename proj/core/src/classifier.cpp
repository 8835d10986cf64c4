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

#include "calmtier/classifier.hpp"

#include <map>
#include <sstream>

namespace calmtier {

std::string tier_name(Tier tier) {
  switch (tier) {
    case Tier::M:
      return "M";
    case Tier::M_O:
      return "M_O";
    case Tier::NM:
      return "NM";
  }
  return "?";
}

std::string tier_display(Tier tier) {
  return tier == Tier::M_O ? "M-O" : tier_name(tier);
}

int tier_exit_code(Tier tier) {
  switch (tier) {
    case Tier::M:
      return 0;
    case Tier::M_O:
      return 10;
    case Tier::NM:
      return 20;
  }
  return 2;
}

std::string heuristic_test_name(HeuristicTest test) {
  switch (test) {
    case HeuristicTest::Retraction:
      return "Retraction";
    case HeuristicTest::SharedResourceNegation:
      return "SharedResourceNegation";
    case HeuristicTest::OrderSensitivity:
      return "OrderSensitivity";
    case HeuristicTest::FeedbackKind:
      return "FeedbackKind";
    case HeuristicTest::MergeConflict:
      return "MergeConflict";
  }
  return "?";
}

Tier bridge_map(Thompson label) {
  switch (label) {
    case Thompson::Pooled:
      return Tier::M;
    case Thompson::Sequential:
      return Tier::M_O;
    case Thompson::Reciprocal:
      return Tier::NM;
    case Thompson::SequentialWithFeedback:
      throw AmbiguousLabel(
          "sequential_with_feedback resolves only through the feedback kind: "
          "additive stays monotone, retractive does not");
  }
  throw AmbiguousLabel("unknown interdependence label");
}

namespace {

Thompson infer_thompson(const TaskSpec& spec) {
  if (!spec.feedbacks.empty()) {
    for (const auto& e : spec.feedbacks) {
      if (e.kind == FeedbackEdge::Kind::Retractive) {
        return Thompson::Reciprocal;
      }
    }
    return Thompson::SequentialWithFeedback;
  }
  if (!spec.handoffs.empty()) {
    return Thompson::Sequential;
  }
  return Thompson::Pooled;
}

bool output_contains_causal(const JoinKind& kind) {
  if (kind.tag() == JoinTag::CausalAppend) return true;
  if (kind.tag() == JoinTag::MapOfJoins) {
    return output_contains_causal(kind.inner());
  }
  return false;
}

bool output_contains_exclusive(const JoinKind& kind) {
  if (kind.tag() == JoinTag::ExclusiveAssign) return true;
  if (kind.tag() == JoinTag::MapOfJoins) {
    return output_contains_exclusive(kind.inner());
  }
  return false;
}

}  // namespace

Classification classify(const TaskSpec& spec) {
  const std::vector<Diagnostic> diagnostics = validate_graph(spec);
  if (!diagnostics.empty()) {
    throw InvalidSpec("spec '" + spec.id +
                      "' fails validation: " + diagnostics.front().message);
  }

  Classification result;
  result.inferred_thompson = infer_thompson(spec);

  TestResult retraction{HeuristicTest::Retraction};
  TestResult negation{HeuristicTest::SharedResourceNegation};
  TestResult ordering{HeuristicTest::OrderSensitivity};
  TestResult feedback{HeuristicTest::FeedbackKind};
  TestResult conflict{HeuristicTest::MergeConflict};

  for (const auto& s : spec.subtasks) {
    if (!result.defaulted && !s.emission) {
      result.defaulted = true;
      result.default_detail = "subtask '" + s.id + "' missing emission";
    }
    if (!result.defaulted && !s.output_decl) {
      result.defaulted = true;
      result.default_detail = "subtask '" + s.id + "' missing output kind";
    }
    if (!retraction.fired && s.emission == Emission::Retractive) {
      retraction.fired = true;
      retraction.detail = "subtask '" + s.id + "' emits retractively";
    }
    if (s.output_decl) {
      if (!conflict.fired && output_contains_exclusive(*s.output_decl)) {
        conflict.fired = true;
        conflict.detail = "subtask '" + s.id +
                          "' writes exclusive_assign output (last-writer "
                          "conflict)";
      }
      if (!ordering.fired && output_contains_causal(*s.output_decl)) {
        ordering.fired = true;
        ordering.detail =
            "subtask '" + s.id + "' emits causal_append (order-keyed) output";
      }
    }
  }

  // Worst-case contention on shared finite resources: static sum of the
  // declared demands. Capacity >= worst case cannot be invalidated, so it
  // does not fire.
  for (const auto& resource : spec.resources) {
    if (!resource.shared || negation.fired) continue;
    Rational worst_case(0);
    for (const auto& s : spec.subtasks) {
      for (const auto& demand : s.demands) {
        if (demand.resource == resource.id) {
          worst_case += demand.amount;
        }
      }
    }
    if (worst_case > resource.capacity) {
      negation.fired = true;
      negation.detail = "resource '" + resource.id + "' capacity " +
                        format_rational(resource.capacity) +
                        " < worst-case demand " + format_rational(worst_case);
    }
  }

  for (const auto& e : spec.feedbacks) {
    if (!feedback.fired && e.kind == FeedbackEdge::Kind::Retractive) {
      feedback.fired = true;
      feedback.detail = "retractive feedback edge '" + e.from + "' -> '" +
                        e.to + "' forces upstream revision";
    }
    if (!ordering.fired && e.kind == FeedbackEdge::Kind::Additive) {
      ordering.fired = true;
      ordering.detail = "additive feedback edge '" + e.from + "' -> '" + e.to +
                        "' needs causal delivery";
    }
  }

  if (!ordering.fired && !spec.handoffs.empty()) {
    ordering.fired = true;
    ordering.detail = "handoff '" + spec.handoffs.front().from + "' -> '" +
                      spec.handoffs.front().to + "' orders activations";
  }

  const bool nm_forced =
      retraction.fired || negation.fired || feedback.fired || conflict.fired;
  if (nm_forced || result.defaulted) {
    result.tier = Tier::NM;
  } else if (ordering.fired) {
    result.tier = Tier::M_O;
  } else {
    result.tier = Tier::M;
  }

  result.evidence = {retraction, negation, ordering, feedback, conflict};
  return result;
}

std::string explain(const Classification& classification) {
  std::ostringstream out;
  out << "tier: " << tier_display(classification.tier) << "\n";
  out << "thompson: " << thompson_name(classification.inferred_thompson)
      << "\n";
  if (classification.defaulted) {
    out << "defaulted to NM (" << classification.default_detail << ")\n";
  }
  bool any_fired = false;
  for (const auto& test : classification.evidence) {
    if (test.fired) {
      any_fired = true;
      out << heuristic_test_name(test.test) << ": " << test.detail << "\n";
    }
  }
  if (!any_fired) {
    out << "no tests fired\n";
  }
  return out.str();
}

}  // namespace calmtier

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

#ifndef CALMTIER_TASK_HPP_
#define CALMTIER_TASK_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "calmtier/lattice.hpp"
#include "calmtier/rational.hpp"

namespace calmtier {

/// Whether a sub-task's output only adds to prior state or may revise it.
enum class Emission { Additive, Retractive };

/// Interdependence label in the classic organizational taxonomy.
enum class Thompson { Pooled, Sequential, SequentialWithFeedback, Reciprocal };

struct Demand {
  std::string resource;
  Rational amount;  // declared worst case, >= 0

  bool operator==(const Demand&) const = default;
};

/// Deterministic behaviour bound to a sub-task. Same inputs, same output.
struct AgentScript {
  enum class Kind {
    Contribute,  // emit a fixed lattice value
    Allocate,    // claim `amount` of `resource`; output records the grant
    Append,      // add a causal entry referencing the inputs actually seen
    Assign,      // write an exclusive register
  };

  Kind kind = Kind::Contribute;
  std::optional<LatticeValue> payload;  // Contribute
  std::string resource;                 // Allocate
  Rational amount;                      // Allocate
  std::string text;                     // Append
  std::string register_id;              // Assign
  std::string value;                    // Assign

  bool operator==(const AgentScript&) const = default;

  nlohmann::json to_json() const;
  static AgentScript from_json(const nlohmann::json& j);
};

struct SubTask {
  std::string id;
  std::string role;
  // Missing emission or output kind is allowed at load time; the classifier
  // treats it as a borderline case and defaults the whole spec to NM.
  std::optional<Emission> emission;
  std::optional<JoinKind> output_decl;
  std::vector<std::string> consumes;  // each must match a handoff edge
  std::vector<Demand> demands;
  std::optional<AgentScript> script;

  bool operator==(const SubTask&) const = default;
};

struct HandoffEdge {
  std::string from;
  std::string to;

  bool operator==(const HandoffEdge&) const = default;
};

struct FeedbackEdge {
  enum class Kind { Additive, Retractive };

  std::string from;  // downstream sender
  std::string to;    // upstream receiver
  Kind kind = Kind::Additive;

  bool operator==(const FeedbackEdge&) const = default;
};

struct ResourceConstraint {
  std::string id;
  Rational capacity;  // >= 0
  bool shared = false;

  bool operator==(const ResourceConstraint&) const = default;
};

struct ValidityPredicate {
  enum class Kind {
    AllPartsPresent,
    ResourceCapRespected,
    CausalReferenceIntact,
    Conjunction,
  };

  Kind kind = Kind::Conjunction;
  std::vector<std::string> parts;           // AllPartsPresent
  std::string resource;                     // ResourceCapRespected
  std::vector<ValidityPredicate> clauses;   // Conjunction

  static ValidityPredicate all_parts(std::vector<std::string> parts);
  static ValidityPredicate resource_cap(std::string resource);
  static ValidityPredicate causal_refs();
  static ValidityPredicate conjunction(std::vector<ValidityPredicate> clauses);

  bool operator==(const ValidityPredicate&) const = default;

  nlohmann::json to_json() const;
  static ValidityPredicate from_json(const nlohmann::json& j);
};

/// A declarative multi-agent workflow. Immutable after construction.
struct TaskSpec {
  std::string id;
  std::string name;
  std::vector<SubTask> subtasks;
  std::vector<HandoffEdge> handoffs;
  std::vector<FeedbackEdge> feedbacks;
  std::vector<ResourceConstraint> resources;
  ValidityPredicate validity = ValidityPredicate::conjunction({});
  std::optional<Thompson> thompson_hint;

  bool operator==(const TaskSpec&) const = default;

  const SubTask* find_subtask(const std::string& id) const;
  const ResourceConstraint* find_resource(const std::string& id) const;
  std::vector<std::string> handoff_predecessors(const std::string& id) const;
};

struct Diagnostic {
  std::string code;     // stable identifier, e.g. "duplicate-id"
  std::string element;  // offending subtask/edge/resource
  std::string message;

  bool operator==(const Diagnostic&) const = default;
};

/// Parses and fully validates a task document. Unknown keys are rejected.
/// Throws SchemaError (malformed field), IntegrityError (dangling id,
/// handoff cycle), or ValueError (negative capacity/demand).
TaskSpec load_task(const std::string& json_text);
TaskSpec load_task_file(const std::filesystem::path& path);

/// Canonical JSON form; load_task(serialize(spec)) round-trips.
std::string serialize(const TaskSpec& spec);
nlohmann::json task_to_json(const TaskSpec& spec);

/// Empty iff every TaskSpec invariant holds. Never throws.
std::vector<Diagnostic> validate_graph(const TaskSpec& spec);

/// Handoff subgraph order (ties broken by declaration order).
/// Throws IntegrityError if the handoffs contain a cycle.
std::vector<std::string> topological_order(const TaskSpec& spec);

std::string emission_name(Emission e);
std::string thompson_name(Thompson t);

}  // namespace calmtier

#endif  // CALMTIER_TASK_HPP_

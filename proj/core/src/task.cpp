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

#include "calmtier/task.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace calmtier {

using json = nlohmann::json;

namespace {

void reject_unknown_keys(const json& j,
                         std::initializer_list<const char*> allowed,
                         const std::string& context) {
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) {
          return key == a;
        }) == allowed.end()) {
      throw SchemaError("unknown key '" + key + "' in " + context);
    }
  }
}

std::string require_string(const json& j, const char* key,
                           const std::string& context) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw SchemaError(context + " needs a string '" + std::string(key) + "'");
  }
  return j[key].get<std::string>();
}

Rational parse_amount(const json& j, const std::string& context) {
  if (j.is_number_integer()) {
    return Rational(j.get<std::int64_t>());
  }
  if (j.is_string()) {
    return parse_rational(j.get<std::string>());
  }
  // Binary floats would make capacity checks inexact; verdicts are binary.
  throw SchemaError(context +
                    ": amounts must be integers or rational strings "
                    "(\"3/4\", \"2.5\")");
}

json amount_to_json(const Rational& r) {
  if (r.denominator() == 1) {
    return json(r.numerator());
  }
  return json(format_rational(r));
}

Emission parse_emission(const std::string& name, const std::string& context) {
  if (name == "additive") return Emission::Additive;
  if (name == "retractive") return Emission::Retractive;
  throw SchemaError(context + ": unknown emission '" + name + "'");
}

Thompson parse_thompson(const std::string& name) {
  if (name == "pooled") return Thompson::Pooled;
  if (name == "sequential") return Thompson::Sequential;
  if (name == "sequential_with_feedback") {
    return Thompson::SequentialWithFeedback;
  }
  if (name == "reciprocal") return Thompson::Reciprocal;
  throw SchemaError("unknown thompson_hint '" + name + "'");
}

FeedbackEdge::Kind parse_feedback_kind(const std::string& name) {
  if (name == "additive") return FeedbackEdge::Kind::Additive;
  if (name == "retractive") return FeedbackEdge::Kind::Retractive;
  throw SchemaError("unknown feedback kind '" + name + "'");
}

}  // namespace

std::string emission_name(Emission e) {
  return e == Emission::Additive ? "additive" : "retractive";
}

std::string thompson_name(Thompson t) {
  switch (t) {
    case Thompson::Pooled:
      return "pooled";
    case Thompson::Sequential:
      return "sequential";
    case Thompson::SequentialWithFeedback:
      return "sequential_with_feedback";
    case Thompson::Reciprocal:
      return "reciprocal";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// AgentScript

json AgentScript::to_json() const {
  switch (kind) {
    case Kind::Contribute:
      return json{{"kind", "contribute"}, {"payload", payload->to_json()}};
    case Kind::Allocate:
      return json{{"kind", "allocate"},
                  {"resource", resource},
                  {"amount", amount_to_json(amount)}};
    case Kind::Append:
      return json{{"kind", "append"}, {"text", text}};
    case Kind::Assign:
      return json{{"kind", "assign"},
                  {"register", register_id},
                  {"value", value}};
  }
  return json{};
}

AgentScript AgentScript::from_json(const json& j) {
  if (!j.is_object()) {
    throw SchemaError("script must be an object");
  }
  const std::string kind = require_string(j, "kind", "script");
  AgentScript script;
  if (kind == "contribute") {
    reject_unknown_keys(j, {"kind", "payload"}, "contribute script");
    if (!j.contains("payload")) {
      throw SchemaError("contribute script needs 'payload'");
    }
    script.kind = Kind::Contribute;
    script.payload = LatticeValue::from_json(j["payload"]);
  } else if (kind == "allocate") {
    reject_unknown_keys(j, {"kind", "resource", "amount"}, "allocate script");
    script.kind = Kind::Allocate;
    script.resource = require_string(j, "resource", "allocate script");
    if (!j.contains("amount")) {
      throw SchemaError("allocate script needs 'amount'");
    }
    script.amount = parse_amount(j["amount"], "allocate script");
  } else if (kind == "append") {
    reject_unknown_keys(j, {"kind", "text"}, "append script");
    script.kind = Kind::Append;
    script.text = require_string(j, "text", "append script");
  } else if (kind == "assign") {
    reject_unknown_keys(j, {"kind", "register", "value"}, "assign script");
    script.kind = Kind::Assign;
    script.register_id = require_string(j, "register", "assign script");
    script.value = require_string(j, "value", "assign script");
  } else {
    throw SchemaError("unknown script kind '" + kind + "'");
  }
  return script;
}

// ---------------------------------------------------------------------------
// ValidityPredicate

ValidityPredicate ValidityPredicate::all_parts(std::vector<std::string> parts) {
  ValidityPredicate p;
  p.kind = Kind::AllPartsPresent;
  p.parts = std::move(parts);
  return p;
}

ValidityPredicate ValidityPredicate::resource_cap(std::string resource) {
  ValidityPredicate p;
  p.kind = Kind::ResourceCapRespected;
  p.resource = std::move(resource);
  return p;
}

ValidityPredicate ValidityPredicate::causal_refs() {
  ValidityPredicate p;
  p.kind = Kind::CausalReferenceIntact;
  return p;
}

ValidityPredicate ValidityPredicate::conjunction(
    std::vector<ValidityPredicate> clauses) {
  ValidityPredicate p;
  p.kind = Kind::Conjunction;
  p.clauses = std::move(clauses);
  return p;
}

json ValidityPredicate::to_json() const {
  switch (kind) {
    case Kind::AllPartsPresent:
      return json{{"kind", "all_parts_present"}, {"parts", parts}};
    case Kind::ResourceCapRespected:
      return json{{"kind", "resource_cap_respected"}, {"resource", resource}};
    case Kind::CausalReferenceIntact:
      return json{{"kind", "causal_reference_intact"}};
    case Kind::Conjunction: {
      json list = json::array();
      for (const auto& clause : clauses) list.push_back(clause.to_json());
      return json{{"kind", "conjunction"}, {"clauses", std::move(list)}};
    }
  }
  return json{};
}

ValidityPredicate ValidityPredicate::from_json(const json& j) {
  if (!j.is_object()) {
    throw SchemaError("validity must be an object");
  }
  const std::string kind = require_string(j, "kind", "validity");
  if (kind == "all_parts_present") {
    reject_unknown_keys(j, {"kind", "parts"}, "all_parts_present");
    if (!j.contains("parts") || !j["parts"].is_array()) {
      throw SchemaError("all_parts_present needs a 'parts' list");
    }
    std::vector<std::string> parts;
    for (const auto& part : j["parts"]) {
      if (!part.is_string()) throw SchemaError("parts must be strings");
      parts.push_back(part.get<std::string>());
    }
    return all_parts(std::move(parts));
  }
  if (kind == "resource_cap_respected") {
    reject_unknown_keys(j, {"kind", "resource"}, "resource_cap_respected");
    return resource_cap(require_string(j, "resource", "resource_cap_respected"));
  }
  if (kind == "causal_reference_intact") {
    reject_unknown_keys(j, {"kind"}, "causal_reference_intact");
    return causal_refs();
  }
  if (kind == "conjunction") {
    reject_unknown_keys(j, {"kind", "clauses"}, "conjunction");
    std::vector<ValidityPredicate> clauses;
    if (j.contains("clauses")) {
      if (!j["clauses"].is_array()) {
        throw SchemaError("conjunction 'clauses' must be a list");
      }
      for (const auto& clause : j["clauses"]) {
        clauses.push_back(from_json(clause));
      }
    }
    return conjunction(std::move(clauses));
  }
  throw SchemaError("unknown validity kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// TaskSpec helpers

const SubTask* TaskSpec::find_subtask(const std::string& subtask_id) const {
  for (const auto& s : subtasks) {
    if (s.id == subtask_id) return &s;
  }
  return nullptr;
}

const ResourceConstraint* TaskSpec::find_resource(
    const std::string& resource_id) const {
  for (const auto& r : resources) {
    if (r.id == resource_id) return &r;
  }
  return nullptr;
}

std::vector<std::string> TaskSpec::handoff_predecessors(
    const std::string& subtask_id) const {
  std::vector<std::string> preds;
  for (const auto& edge : handoffs) {
    if (edge.to == subtask_id) preds.push_back(edge.from);
  }
  return preds;
}

std::vector<std::string> topological_order(const TaskSpec& spec) {
  std::map<std::string, std::size_t> indegree;
  for (const auto& s : spec.subtasks) indegree[s.id] = 0;
  for (const auto& e : spec.handoffs) {
    if (indegree.count(e.to)) indegree[e.to] += 1;
  }

  std::vector<std::string> order;
  std::vector<bool> emitted(spec.subtasks.size(), false);
  while (order.size() < spec.subtasks.size()) {
    bool progressed = false;
    for (std::size_t i = 0; i < spec.subtasks.size(); ++i) {
      const std::string& id = spec.subtasks[i].id;
      if (!emitted[i] && indegree[id] == 0) {
        emitted[i] = true;
        order.push_back(id);
        for (const auto& e : spec.handoffs) {
          if (e.from == id && indegree.count(e.to)) indegree[e.to] -= 1;
        }
        progressed = true;
        break;
      }
    }
    if (!progressed) {
      throw IntegrityError("handoff edges contain a cycle");
    }
  }
  return order;
}

// ---------------------------------------------------------------------------
// validate_graph

namespace {

bool handoff_path_exists(const TaskSpec& spec, const std::string& from,
                         const std::string& to) {
  std::set<std::string> seen{from};
  std::deque<std::string> frontier{from};
  while (!frontier.empty()) {
    const std::string node = frontier.front();
    frontier.pop_front();
    if (node == to) return true;
    for (const auto& e : spec.handoffs) {
      if (e.from == node && seen.insert(e.to).second) {
        frontier.push_back(e.to);
      }
    }
  }
  return false;
}

void collect_validity_diagnostics(const TaskSpec& spec,
                                  const ValidityPredicate& predicate,
                                  std::vector<Diagnostic>& out) {
  switch (predicate.kind) {
    case ValidityPredicate::Kind::ResourceCapRespected:
      if (!spec.find_resource(predicate.resource)) {
        out.push_back({"dangling-validity-resource", predicate.resource,
                       "validity references unknown resource '" +
                           predicate.resource + "'"});
      }
      break;
    case ValidityPredicate::Kind::Conjunction:
      for (const auto& clause : predicate.clauses) {
        collect_validity_diagnostics(spec, clause, out);
      }
      break;
    default:
      break;
  }
}

}  // namespace

std::vector<Diagnostic> validate_graph(const TaskSpec& spec) {
  std::vector<Diagnostic> out;

  std::set<std::string> subtask_ids;
  for (const auto& s : spec.subtasks) {
    if (!subtask_ids.insert(s.id).second) {
      out.push_back({"duplicate-id", s.id,
                     "duplicate id: subtask '" + s.id + "' declared twice"});
    }
  }
  std::set<std::string> resource_ids;
  for (const auto& r : spec.resources) {
    if (!resource_ids.insert(r.id).second) {
      out.push_back({"duplicate-id", r.id,
                     "duplicate id: resource '" + r.id + "' declared twice"});
    }
    if (r.capacity < Rational(0)) {
      out.push_back({"negative-capacity", r.id,
                     "resource '" + r.id + "' has negative capacity " +
                         format_rational(r.capacity)});
    }
  }

  for (const auto& e : spec.handoffs) {
    if (e.from == e.to) {
      out.push_back({"self-handoff", e.from,
                     "handoff '" + e.from + "' -> '" + e.to +
                         "' loops on itself"});
    }
    for (const std::string* endpoint : {&e.from, &e.to}) {
      if (!subtask_ids.count(*endpoint)) {
        out.push_back({"dangling-handoff", *endpoint,
                       "handoff references unknown subtask '" + *endpoint +
                           "'"});
      }
    }
  }

  try {
    topological_order(spec);
  } catch (const IntegrityError&) {
    out.push_back({"handoff-cycle", spec.id,
                   "handoff edges form a cycle; cycles must be feedback edges"});
  }

  for (const auto& e : spec.feedbacks) {
    bool endpoints_ok = true;
    for (const std::string* endpoint : {&e.from, &e.to}) {
      if (!subtask_ids.count(*endpoint)) {
        out.push_back({"dangling-feedback", *endpoint,
                       "feedback references unknown subtask '" + *endpoint +
                           "'"});
        endpoints_ok = false;
      }
    }
    if (endpoints_ok && !handoff_path_exists(spec, e.to, e.from)) {
      out.push_back({"feedback-without-upstream-path",
                     e.from + "->" + e.to,
                     "feedback without upstream path: no handoff route '" +
                         e.to + "' -> ... -> '" + e.from + "'"});
    }
  }

  for (const auto& s : spec.subtasks) {
    for (const auto& consumed : s.consumes) {
      const bool matched =
          std::any_of(spec.handoffs.begin(), spec.handoffs.end(),
                      [&](const HandoffEdge& e) {
                        return e.from == consumed && e.to == s.id;
                      });
      if (!matched) {
        out.push_back({"consumes-without-handoff", s.id,
                       "subtask '" + s.id + "' consumes '" + consumed +
                           "' without a matching handoff edge"});
      }
    }
    for (const auto& demand : s.demands) {
      if (!resource_ids.count(demand.resource)) {
        out.push_back({"dangling-demand", s.id,
                       "subtask '" + s.id + "' demands unknown resource '" +
                           demand.resource + "'"});
      }
      if (demand.amount < Rational(0)) {
        out.push_back({"negative-demand", s.id,
                       "subtask '" + s.id + "' demands negative amount " +
                           format_rational(demand.amount)});
      }
    }
    if (s.script && s.script->kind == AgentScript::Kind::Contribute &&
        s.output_decl && s.script->payload &&
        s.script->payload->kind() != *s.output_decl) {
      out.push_back({"script-kind-mismatch", s.id,
                     "subtask '" + s.id + "' script emits " +
                         s.script->payload->kind().name() +
                         " but declares " + s.output_decl->name()});
    }
    if (s.script && s.script->kind == AgentScript::Kind::Allocate) {
      if (!resource_ids.count(s.script->resource)) {
        out.push_back({"dangling-demand", s.id,
                       "subtask '" + s.id + "' allocates unknown resource '" +
                           s.script->resource + "'"});
      } else {
        // Declared demand is the worst case the classifier reasons from;
        // the script may not exceed it.
        Rational declared(0);
        for (const auto& demand : s.demands) {
          if (demand.resource == s.script->resource) {
            declared += demand.amount;
          }
        }
        if (s.script->amount > declared) {
          out.push_back({"allocation-exceeds-demand", s.id,
                         "subtask '" + s.id + "' allocates " +
                             format_rational(s.script->amount) + " of '" +
                             s.script->resource + "' but declares demand " +
                             format_rational(declared)});
        }
      }
    }
  }

  collect_validity_diagnostics(spec, spec.validity, out);
  return out;
}

// ---------------------------------------------------------------------------
// load / serialize

namespace {

SubTask subtask_from_json(const json& j) {
  if (!j.is_object()) {
    throw SchemaError("subtask must be an object");
  }
  reject_unknown_keys(j,
                      {"id", "role", "emission", "output_decl", "consumes",
                       "demands", "script"},
                      "subtask");
  SubTask s;
  s.id = require_string(j, "id", "subtask");
  s.role = j.contains("role")
               ? require_string(j, "role", "subtask")
               : std::string{};
  if (j.contains("emission")) {
    s.emission = parse_emission(
        require_string(j, "emission", "subtask '" + s.id + "'"),
        "subtask '" + s.id + "'");
  }
  if (j.contains("output_decl")) {
    s.output_decl = JoinKind::from_json(j["output_decl"]);
  }
  if (j.contains("consumes")) {
    if (!j["consumes"].is_array()) {
      throw SchemaError("subtask 'consumes' must be a list");
    }
    for (const auto& c : j["consumes"]) {
      if (!c.is_string()) throw SchemaError("consumes ids must be strings");
      s.consumes.push_back(c.get<std::string>());
    }
  }
  if (j.contains("demands")) {
    if (!j["demands"].is_array()) {
      throw SchemaError("subtask 'demands' must be a list");
    }
    for (const auto& d : j["demands"]) {
      if (!d.is_object()) throw SchemaError("demand must be an object");
      reject_unknown_keys(d, {"resource", "amount"}, "demand");
      Demand demand;
      demand.resource = require_string(d, "resource", "demand");
      if (!d.contains("amount")) throw SchemaError("demand needs 'amount'");
      demand.amount = parse_amount(d["amount"], "demand");
      s.demands.push_back(std::move(demand));
    }
  }
  if (j.contains("script")) {
    s.script = AgentScript::from_json(j["script"]);
  }
  return s;
}

json subtask_to_json(const SubTask& s) {
  json j{{"id", s.id}, {"role", s.role}};
  if (s.emission) j["emission"] = emission_name(*s.emission);
  if (s.output_decl) j["output_decl"] = s.output_decl->to_json();
  if (!s.consumes.empty()) j["consumes"] = s.consumes;
  if (!s.demands.empty()) {
    json demands = json::array();
    for (const auto& d : s.demands) {
      demands.push_back(
          json{{"resource", d.resource}, {"amount", amount_to_json(d.amount)}});
    }
    j["demands"] = std::move(demands);
  }
  if (s.script) j["script"] = s.script->to_json();
  return j;
}

TaskSpec task_from_json(const json& j) {
  if (!j.is_object()) {
    throw SchemaError("task document must be a JSON object");
  }
  reject_unknown_keys(j,
                      {"id", "name", "subtasks", "handoffs", "feedbacks",
                       "resources", "validity", "thompson_hint"},
                      "task document");
  TaskSpec spec;
  spec.id = j.contains("id") ? require_string(j, "id", "task") : std::string{};
  spec.name =
      j.contains("name") ? require_string(j, "name", "task") : std::string{};

  if (j.contains("subtasks")) {
    if (!j["subtasks"].is_array()) {
      throw SchemaError("'subtasks' must be a list");
    }
    for (const auto& s : j["subtasks"]) {
      spec.subtasks.push_back(subtask_from_json(s));
    }
  }
  if (j.contains("handoffs")) {
    if (!j["handoffs"].is_array()) {
      throw SchemaError("'handoffs' must be a list");
    }
    for (const auto& e : j["handoffs"]) {
      if (!e.is_object()) throw SchemaError("handoff must be an object");
      reject_unknown_keys(e, {"from", "to"}, "handoff");
      spec.handoffs.push_back({require_string(e, "from", "handoff"),
                               require_string(e, "to", "handoff")});
    }
  }
  if (j.contains("feedbacks")) {
    if (!j["feedbacks"].is_array()) {
      throw SchemaError("'feedbacks' must be a list");
    }
    for (const auto& e : j["feedbacks"]) {
      if (!e.is_object()) throw SchemaError("feedback must be an object");
      reject_unknown_keys(e, {"from", "to", "kind"}, "feedback");
      FeedbackEdge edge;
      edge.from = require_string(e, "from", "feedback");
      edge.to = require_string(e, "to", "feedback");
      edge.kind =
          parse_feedback_kind(require_string(e, "kind", "feedback"));
      spec.feedbacks.push_back(std::move(edge));
    }
  }
  if (j.contains("resources")) {
    if (!j["resources"].is_array()) {
      throw SchemaError("'resources' must be a list");
    }
    for (const auto& r : j["resources"]) {
      if (!r.is_object()) throw SchemaError("resource must be an object");
      reject_unknown_keys(r, {"id", "capacity", "shared"}, "resource");
      ResourceConstraint resource;
      resource.id = require_string(r, "id", "resource");
      if (!r.contains("capacity")) {
        throw SchemaError("resource needs 'capacity'");
      }
      resource.capacity = parse_amount(r["capacity"], "resource capacity");
      if (r.contains("shared")) {
        if (!r["shared"].is_boolean()) {
          throw SchemaError("resource 'shared' must be a boolean");
        }
        resource.shared = r["shared"].get<bool>();
      }
      spec.resources.push_back(std::move(resource));
    }
  }
  if (j.contains("validity")) {
    spec.validity = ValidityPredicate::from_json(j["validity"]);
  }
  if (j.contains("thompson_hint")) {
    spec.thompson_hint =
        parse_thompson(require_string(j, "thompson_hint", "task"));
  }
  return spec;
}

/// Maps the first semantic diagnostic onto the documented error taxonomy.
[[noreturn]] void throw_for_diagnostic(const Diagnostic& d) {
  if (d.code == "negative-capacity" || d.code == "negative-demand") {
    throw ValueError(d.message);
  }
  throw IntegrityError(d.message);
}

}  // namespace

TaskSpec load_task(const std::string& json_text) {
  json parsed;
  try {
    parsed = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("not valid JSON: ") + e.what());
  }
  TaskSpec spec = task_from_json(parsed);
  const std::vector<Diagnostic> diagnostics = validate_graph(spec);
  if (!diagnostics.empty()) {
    throw_for_diagnostic(diagnostics.front());
  }
  return spec;
}

TaskSpec load_task_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw SchemaError("cannot read task file '" + path.string() + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load_task(buffer.str());
}

json task_to_json(const TaskSpec& spec) {
  json j{{"id", spec.id}, {"name", spec.name}};
  json subtasks = json::array();
  for (const auto& s : spec.subtasks) subtasks.push_back(subtask_to_json(s));
  j["subtasks"] = std::move(subtasks);

  json handoffs = json::array();
  for (const auto& e : spec.handoffs) {
    handoffs.push_back(json{{"from", e.from}, {"to", e.to}});
  }
  j["handoffs"] = std::move(handoffs);

  json feedbacks = json::array();
  for (const auto& e : spec.feedbacks) {
    feedbacks.push_back(json{
        {"from", e.from},
        {"to", e.to},
        {"kind",
         e.kind == FeedbackEdge::Kind::Additive ? "additive" : "retractive"}});
  }
  j["feedbacks"] = std::move(feedbacks);

  json resources = json::array();
  for (const auto& r : spec.resources) {
    resources.push_back(json{{"id", r.id},
                             {"capacity", amount_to_json(r.capacity)},
                             {"shared", r.shared}});
  }
  j["resources"] = std::move(resources);

  j["validity"] = spec.validity.to_json();
  if (spec.thompson_hint) {
    j["thompson_hint"] = thompson_name(*spec.thompson_hint);
  }
  return j;
}

std::string serialize(const TaskSpec& spec) {
  return task_to_json(spec).dump(2) + "\n";
}

}  // namespace calmtier

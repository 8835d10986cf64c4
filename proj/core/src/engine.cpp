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

#include "calmtier/engine.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace calmtier {

using json = nlohmann::json;

namespace {
constexpr std::uint64_t kNever = std::numeric_limits<std::uint64_t>::max();
constexpr std::size_t kExhaustiveEventLimit = 6;
}  // namespace

// ---------------------------------------------------------------------------
// names / small types

std::string schedule_mode_name(ScheduleMode mode) {
  switch (mode) {
    case ScheduleMode::Uncoordinated:
      return "uncoordinated";
    case ScheduleMode::Causal:
      return "causal";
    case ScheduleMode::Orchestrated:
      return "orchestrated";
  }
  return "?";
}

ScheduleMode schedule_mode_from_name(const std::string& name) {
  if (name == "uncoordinated") return ScheduleMode::Uncoordinated;
  if (name == "causal") return ScheduleMode::Causal;
  if (name == "orchestrated") return ScheduleMode::Orchestrated;
  throw ValueError("unknown schedule mode '" + name + "'");
}

std::string verdict_name(Verdict v) {
  return v == Verdict::Valid ? "VALID" : "INVALID";
}

void VectorClock::merge(const VectorClock& other) {
  for (const auto& [id, counter] : other.stamps) {
    auto [it, inserted] = stamps.emplace(id, counter);
    if (!inserted) it->second = std::max(it->second, counter);
  }
}

void VectorClock::advance(const std::string& id) { stamps[id] += 1; }

bool VectorClock::dominates(const VectorClock& other) const {
  for (const auto& [id, counter] : other.stamps) {
    const auto it = stamps.find(id);
    if (it == stamps.end() || it->second < counter) return false;
  }
  return true;
}

json PartitionPlan::to_json() const {
  json list = json::array();
  for (const auto& w : windows) {
    list.push_back(json{{"start", w.start},
                        {"end", w.end},
                        {"blocked", std::vector<std::string>(
                                        w.blocked.begin(), w.blocked.end())}});
  }
  return json{{"windows", std::move(list)}};
}

PartitionPlan PartitionPlan::from_json(const json& j) {
  if (!j.is_object() || !j.contains("windows") || !j["windows"].is_array()) {
    throw SchemaError("partition plan needs a 'windows' list");
  }
  for (const auto& [key, _] : j.items()) {
    if (key != "windows") {
      throw SchemaError("unknown key '" + key + "' in partition plan");
    }
  }
  PartitionPlan plan;
  for (const auto& w : j["windows"]) {
    if (!w.is_object() || !w.contains("start") || !w.contains("end") ||
        !w.contains("blocked")) {
      throw SchemaError("partition window needs start, end, blocked");
    }
    PartitionWindow window;
    window.start = w["start"].get<std::uint64_t>();
    window.end = w["end"].get<std::uint64_t>();
    if (window.end < window.start) {
      throw ValueError("partition window ends before it starts");
    }
    for (const auto& agent : w["blocked"]) {
      window.blocked.insert(agent.get<std::string>());
    }
    plan.windows.push_back(std::move(window));
  }
  return plan;
}

PartitionPlan PartitionPlan::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw SchemaError("cannot read partition plan '" + path.string() + "'");
  }
  json parsed;
  try {
    in >> parsed;
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("partition plan is not valid JSON: ") +
                      e.what());
  }
  return from_json(parsed);
}

// ---------------------------------------------------------------------------
// schedules

std::size_t message_event_count(const TaskSpec& spec) {
  return spec.subtasks.size() + 2 * spec.feedbacks.size();
}

namespace {

std::vector<ScheduledEvent> default_events(const TaskSpec& spec) {
  std::vector<ScheduledEvent> events;
  for (const auto& s : spec.subtasks) {
    events.push_back({ScheduledEvent::Type::Output, s.id, 0});
  }
  for (std::size_t i = 0; i < spec.feedbacks.size(); ++i) {
    events.push_back({ScheduledEvent::Type::FeedbackMsg, "", i});
    events.push_back({ScheduledEvent::Type::FollowUp, "", i});
  }
  return events;
}

// std::shuffle's draw is implementation-defined; this one is not.
class DeterministicRng {
 public:
  explicit DeterministicRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t below(std::uint64_t bound) { return engine_() % bound; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace

Schedule default_schedule(const TaskSpec& spec) {
  Schedule schedule;
  schedule.order = default_events(spec);
  schedule.delays.assign(schedule.order.size(), 0);
  return schedule;
}

Schedule seeded_schedule(const TaskSpec& spec, std::uint64_t seed) {
  Schedule schedule = default_schedule(spec);
  DeterministicRng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (std::size_t i = schedule.order.size(); i > 1; --i) {
    std::swap(schedule.order[i - 1], schedule.order[rng.below(i)]);
  }
  return schedule;
}

std::vector<Schedule> exhaustive_schedules(const TaskSpec& spec) {
  const std::vector<ScheduledEvent> events = default_events(spec);
  std::vector<std::size_t> permutation(events.size());
  std::iota(permutation.begin(), permutation.end(), 0);

  std::vector<Schedule> schedules;
  do {
    Schedule schedule;
    schedule.order.reserve(events.size());
    for (const std::size_t index : permutation) {
      schedule.order.push_back(events[index]);
    }
    schedule.delays.assign(events.size(), 0);
    schedules.push_back(std::move(schedule));
  } while (std::next_permutation(permutation.begin(), permutation.end()));
  return schedules;
}

// ---------------------------------------------------------------------------
// FinalOutput

std::vector<const LatticeValue*> FinalOutput::members() const {
  std::vector<const LatticeValue*> out;
  if (is_merged()) {
    out.push_back(&merged());
  } else {
    for (const auto& [_, value] : composite()) {
      out.push_back(&value);
    }
  }
  return out;
}

json FinalOutput::to_json() const {
  if (is_merged()) {
    return merged().to_json();
  }
  json parts = json::object();
  for (const auto& [key, value] : composite()) {
    parts[key] = value.to_json();
  }
  return json{{"kind", "composite"}, {"payload", std::move(parts)}};
}

json RunResult::to_json() const {
  json trace_json = json::array();
  for (const auto& event : trace) {
    trace_json.push_back(json{{"tick", event.tick},
                              {"type", event.type},
                              {"actor", event.actor},
                              {"detail", event.detail}});
  }
  return json{{"mode", schedule_mode_name(mode)},
              {"seed", seed},
              {"verdict", verdict_name(verdict)},
              {"verdict_reason", verdict_reason},
              {"final_output", final_output.to_json()},
              {"messages_total", messages_total},
              {"messages_coordination", messages_coordination},
              {"cost_units", cost_units},
              {"trace", std::move(trace_json)}};
}

// ---------------------------------------------------------------------------
// simulation core

namespace {

struct Contribution {
  std::string subtask;
  LatticeValue value;
  std::uint64_t pool_tick = 0;  // when the collector has it
  std::size_t serial = 0;       // emission order, for arbitration
  bool retractive = false;
  bool erased = false;
};

class Simulation {
 public:
  Simulation(const TaskSpec& spec, ScheduleMode mode, const Schedule& schedule)
      : spec_(spec), mode_(mode), schedule_(schedule) {
    for (const auto& s : spec_.subtasks) {
      if (!s.script) {
        throw ScriptMissing("subtask '" + s.id + "' has no script");
      }
      index_by_id_[s.id] = &s;
    }
    for (const auto& r : spec_.resources) {
      remaining_[r.id] = r.capacity;
    }
  }

  RunResult execute() {
    if (mode_ == ScheduleMode::Orchestrated) {
      run_orchestrated();
    } else {
      run_scheduled();
    }
    return finish();
  }

 private:
  // -- messaging ----------------------------------------------------------

  std::uint64_t unblocked_tick(std::uint64_t tick,
                               const std::string& agent) const {
    bool moved = true;
    while (moved) {
      moved = false;
      for (const auto& w : schedule_.partitions.windows) {
        if (tick >= w.start && tick < w.end && w.blocked.count(agent)) {
          tick = w.end;
          moved = true;
        }
      }
    }
    return tick;
  }

  std::uint64_t send_message(const std::string& id, const std::string& from,
                             const std::string& to, std::uint64_t tick,
                             std::uint64_t delay, bool coordination) {
    const std::uint64_t delivery = unblocked_tick(tick + 1 + delay, to);
    trace_.push_back({tick, "send", from, id});
    trace_.push_back({delivery, "deliver", to, id});
    messages_total_ += 1;
    if (coordination) messages_coordination_ += 1;
    return delivery;
  }

  // -- scripts ------------------------------------------------------------

  struct VisibleInput {
    const SubTask* subtask = nullptr;
    std::string main_entry_key;  // empty when the input is not causal
  };

  LatticeValue primary_value(const SubTask& s,
                             const std::vector<VisibleInput>& inputs) {
    const AgentScript& script = *s.script;
    switch (script.kind) {
      case AgentScript::Kind::Contribute:
        return *script.payload;
      case AgentScript::Kind::Allocate: {
        Rational grant = script.amount;
        if (mode_ == ScheduleMode::Orchestrated) {
          Rational& left = remaining_.at(script.resource);
          if (grant > left) {
            trace_.push_back({0, "trim", "orchestrator",
                              "subtask '" + s.id + "' request " +
                                  format_rational(script.amount) +
                                  " trimmed to " + format_rational(left)});
            grant = left;
          }
          left -= grant;
        }
        LatticeValue::Map cell;
        cell.emplace(script.resource + "/" + s.id, LatticeValue::max_of(grant));
        return LatticeValue::map_of(JoinKind::max_register(), std::move(cell));
      }
      case AgentScript::Kind::Append: {
        CausalEntry entry;
        entry.author = s.id;
        entry.text = script.text;
        for (const auto& input : inputs) {
          if (!input.main_entry_key.empty()) {
            entry.refs.push_back(input.main_entry_key);
          }
        }
        std::sort(entry.refs.begin(), entry.refs.end());
        return LatticeValue::causal_of({std::move(entry)});
      }
      case AgentScript::Kind::Assign:
        return LatticeValue::exclusive_of(
            {script.register_id, script.value});
    }
    throw Error("unreachable script kind");
  }

  /// Retractive feedback makes the upstream replace its output; additive
  /// feedback makes it add on top. Only append/assign scripts have anything
  /// to revise or extend; others produce no follow-up message.
  std::optional<LatticeValue> follow_up_value(const SubTask& s,
                                              const FeedbackEdge& edge,
                                              std::size_t feedback_index,
                                              bool feedback_seen) {
    const AgentScript& script = *s.script;
    if (edge.kind == FeedbackEdge::Kind::Additive) {
      if (script.kind != AgentScript::Kind::Append) return std::nullopt;
      CausalEntry entry;
      entry.author = s.id;
      entry.slot = "addendum:" + std::to_string(feedback_index);
      entry.text = script.text + " addendum";
      if (feedback_seen) {
        entry.refs.push_back(main_entry_key(edge.from));
      }
      return LatticeValue::causal_of({std::move(entry)});
    }
    // Retractive: without the feedback in hand there is nothing to revise.
    if (!feedback_seen) return std::nullopt;
    if (script.kind == AgentScript::Kind::Append) {
      CausalEntry entry;
      entry.author = s.id;
      entry.revision = 2;
      entry.text = script.text + " (rev 2)";
      entry.refs.push_back(main_entry_key(edge.from));
      return LatticeValue::causal_of({std::move(entry)});
    }
    if (script.kind == AgentScript::Kind::Assign) {
      return LatticeValue::exclusive_of(
          {script.register_id, script.value + " (rev 2)"});
    }
    return std::nullopt;
  }

  std::string main_entry_key(const std::string& subtask_id) const {
    return subtask_id + "#main#1";
  }

  // -- shared state -------------------------------------------------------

  void record_contribution(const std::string& subtask, LatticeValue value,
                           std::uint64_t pool_tick, bool retractive) {
    contributions_.push_back(
        {subtask, std::move(value), pool_tick, next_serial_++, retractive});
  }

  const SubTask& subtask_at(const std::string& id) const {
    return *index_by_id_.at(id);
  }

  // -- uncoordinated / causal ---------------------------------------------

  struct AgentState {
    bool activated = false;
    std::uint64_t output_pool_tick = kNever;
    VectorClock clock;
    VectorClock output_stamp;
    // causal mode: per-successor handoff delivery tick
    std::map<std::string, std::uint64_t> handoff_delivery;
  };

  bool input_visible(const std::string& producer, const std::string& reader,
                     std::uint64_t tick) const {
    const auto it = agents_.find(producer);
    if (it == agents_.end() || !it->second.activated) return false;
    if (mode_ == ScheduleMode::Causal) {
      const auto delivery = it->second.handoff_delivery.find(reader);
      return delivery != it->second.handoff_delivery.end() &&
             delivery->second <= tick;
    }
    return unblocked_tick(it->second.output_pool_tick, reader) <= tick;
  }

  bool event_eligible(const ScheduledEvent& event, std::uint64_t tick) const {
    if (mode_ != ScheduleMode::Causal) return true;
    switch (event.type) {
      case ScheduledEvent::Type::Output:
        for (const auto& pred : spec_.handoff_predecessors(event.subtask)) {
          if (!input_visible(pred, event.subtask, tick)) return false;
        }
        return true;
      case ScheduledEvent::Type::FeedbackMsg: {
        const auto& edge = spec_.feedbacks[event.feedback];
        const auto it = agents_.find(edge.from);
        return it != agents_.end() && it->second.activated;
      }
      case ScheduledEvent::Type::FollowUp:
        return feedback_delivered_[event.feedback] <= tick;
    }
    return true;
  }

  void execute_output(const ScheduledEvent& event, std::uint64_t tick,
                      std::uint64_t delay) {
    const SubTask& s = subtask_at(event.subtask);
    AgentState& state = agents_[s.id];

    std::vector<VisibleInput> inputs;
    VectorClock clock;
    for (const auto& consumed : s.consumes) {
      if (!input_visible(consumed, s.id, tick)) continue;
      const SubTask& producer = subtask_at(consumed);
      VisibleInput input{&producer, ""};
      if (producer.script &&
          producer.script->kind == AgentScript::Kind::Append) {
        input.main_entry_key = main_entry_key(consumed);
      }
      inputs.push_back(input);
      clock.merge(agents_.at(consumed).output_stamp);
    }
    if (mode_ == ScheduleMode::Causal) {
      // Gating must already guarantee dominance over predecessor stamps.
      for (const auto& pred : spec_.handoff_predecessors(s.id)) {
        VectorClock merged = clock;
        merged.merge(agents_.at(pred).output_stamp);
        clock = std::move(merged);
      }
    }
    clock.advance(s.id);
    state.clock = clock;
    state.output_stamp = clock;

    std::string seen = "inputs:";
    if (inputs.empty()) {
      seen += " none";
    } else {
      for (const auto& input : inputs) seen += " " + input.subtask->id;
    }
    trace_.push_back({tick, "activate", s.id, seen});

    LatticeValue value = primary_value(s, inputs);
    state.activated = true;
    state.output_pool_tick =
        send_message("output:" + s.id, s.id, "collector", tick, delay, false);
    if (mode_ == ScheduleMode::Causal) {
      for (const auto& edge : spec_.handoffs) {
        if (edge.from == s.id) {
          state.handoff_delivery[edge.to] = send_message(
              "handoff:" + edge.from + "->" + edge.to, edge.from, edge.to,
              tick, delay, false);
        }
      }
    }
    record_contribution(s.id, std::move(value), state.output_pool_tick,
                        s.emission == Emission::Retractive);
  }

  void execute_feedback_msg(const ScheduledEvent& event, std::uint64_t tick,
                            std::uint64_t delay) {
    const FeedbackEdge& edge = spec_.feedbacks[event.feedback];
    const auto it = agents_.find(edge.from);
    if (it == agents_.end() || !it->second.activated) {
      // Nothing to report yet; the comment is never produced.
      return;
    }
    feedback_delivered_[event.feedback] =
        send_message("feedback:" + std::to_string(event.feedback), edge.from,
                     edge.to, tick, delay, false);
  }

  void execute_follow_up(const ScheduledEvent& event, std::uint64_t tick,
                         std::uint64_t delay) {
    const FeedbackEdge& edge = spec_.feedbacks[event.feedback];
    const SubTask& s = subtask_at(edge.to);
    const bool feedback_seen = feedback_delivered_[event.feedback] <= tick;
    std::optional<LatticeValue> value =
        follow_up_value(s, edge, event.feedback, feedback_seen);
    if (!value) return;
    trace_.push_back({tick, "activate", s.id,
                      feedback_seen ? "follow-up with feedback"
                                    : "follow-up without feedback"});
    const std::uint64_t pool_tick = send_message(
        "followup:" + s.id + ":" + std::to_string(event.feedback), s.id,
        "collector", tick, delay, false);
    record_contribution(s.id, std::move(*value), pool_tick,
                        edge.kind == FeedbackEdge::Kind::Retractive);
  }

  void run_scheduled() {
    feedback_delivered_.assign(spec_.feedbacks.size(), kNever);
    std::vector<bool> done(schedule_.order.size(), false);
    std::size_t executed = 0;
    std::uint64_t tick = 0;

    std::uint64_t budget = 16;
    for (const std::uint64_t d : schedule_.delays) budget += d;
    for (const auto& w : schedule_.partitions.windows) {
      budget = std::max(budget, w.end + 16);
    }
    budget += 4 * schedule_.order.size() + 16;

    while (executed < schedule_.order.size()) {
      bool progressed = false;
      for (std::size_t i = 0; i < schedule_.order.size(); ++i) {
        if (done[i]) continue;
        const ScheduledEvent& event = schedule_.order[i];
        if (!event_eligible(event, tick)) continue;
        const std::uint64_t delay =
            i < schedule_.delays.size() ? schedule_.delays[i] : 0;
        switch (event.type) {
          case ScheduledEvent::Type::Output:
            execute_output(event, tick, delay);
            break;
          case ScheduledEvent::Type::FeedbackMsg:
            execute_feedback_msg(event, tick, delay);
            break;
          case ScheduledEvent::Type::FollowUp:
            execute_follow_up(event, tick, delay);
            break;
        }
        done[i] = true;
        executed += 1;
        progressed = true;
        break;
      }
      tick += 1;
      if (!progressed && tick > budget) {
        throw Error("schedule stalled; delivery guards cannot all be met");
      }
    }
    end_tick_ = tick;
    apply_retractions();
  }

  /// Uncoordinated/causal only: a retractive delivery rewrites the shared
  /// artifact, erasing same-kind contributions the pool already held.
  void apply_retractions() {
    std::vector<Contribution*> by_arrival;
    for (auto& c : contributions_) by_arrival.push_back(&c);
    std::sort(by_arrival.begin(), by_arrival.end(),
              [](const Contribution* a, const Contribution* b) {
                return std::tie(a->pool_tick, a->serial) <
                       std::tie(b->pool_tick, b->serial);
              });
    for (std::size_t i = 0; i < by_arrival.size(); ++i) {
      if (!by_arrival[i]->retractive) continue;
      for (std::size_t j = 0; j < i; ++j) {
        if (by_arrival[j]->value.kind() == by_arrival[i]->value.kind() &&
            !is_revision_of_same_author(*by_arrival[i], *by_arrival[j])) {
          by_arrival[j]->erased = true;
        }
      }
    }
  }

  /// A revision replacing the author's own earlier output is resolved by the
  /// retraction-conflict check, not by pool erasure.
  static bool is_revision_of_same_author(const Contribution& later,
                                         const Contribution& earlier) {
    return later.subtask == earlier.subtask;
  }

  // -- orchestrated ---------------------------------------------------------

  std::vector<std::string> orchestrated_order() const {
    std::map<std::string, std::size_t> indegree;
    std::map<std::string, std::size_t> decl_index;
    for (std::size_t i = 0; i < spec_.subtasks.size(); ++i) {
      indegree[spec_.subtasks[i].id] = 0;
      decl_index[spec_.subtasks[i].id] = i;
    }
    for (const auto& e : spec_.handoffs) indegree[e.to] += 1;

    std::vector<std::string> order;
    std::set<std::string> emitted;
    while (order.size() < spec_.subtasks.size()) {
      const SubTask* best = nullptr;
      for (const auto& s : spec_.subtasks) {
        if (emitted.count(s.id) || indegree[s.id] != 0) continue;
        if (!best) {
          best = &s;
          continue;
        }
        // Retractive rewrites are planned before additive contributions so
        // they cannot erase reviewed work.
        const auto rank = [&](const SubTask& t) {
          return std::pair<int, std::size_t>(
              t.emission == Emission::Retractive ? 0 : 1, decl_index[t.id]);
        };
        if (rank(s) < rank(*best)) best = &s;
      }
      if (!best) throw IntegrityError("handoff edges contain a cycle");
      emitted.insert(best->id);
      order.push_back(best->id);
      for (const auto& e : spec_.handoffs) {
        if (e.from == best->id) indegree[e.to] -= 1;
      }
    }
    return order;
  }

  void run_orchestrated() {
    feedback_delivered_.assign(spec_.feedbacks.size(), kNever);
    std::uint64_t tick = 0;
    send_message("plan", "orchestrator", "team", tick, 0, true);
    tick += 2;

    for (const auto& id : orchestrated_order()) {
      const SubTask& s = subtask_at(id);
      std::uint64_t ready =
          send_message("assign:" + id, "orchestrator", id, tick, 0, true);
      std::vector<VisibleInput> inputs;
      VectorClock clock;
      for (const auto& pred : spec_.handoff_predecessors(id)) {
        ready = std::max(
            ready, send_message("relay:" + pred + "->" + id, "orchestrator",
                                id, tick, 0, true));
        const SubTask& producer = subtask_at(pred);
        VisibleInput input{&producer, ""};
        if (producer.script &&
            producer.script->kind == AgentScript::Kind::Append) {
          input.main_entry_key = main_entry_key(pred);
        }
        inputs.push_back(input);
        clock.merge(agents_.at(pred).output_stamp);
      }
      std::sort(inputs.begin(), inputs.end(),
                [](const VisibleInput& a, const VisibleInput& b) {
                  return a.subtask->id < b.subtask->id;
                });
      clock.advance(id);

      std::string seen = "inputs:";
      if (inputs.empty()) {
        seen += " none";
      } else {
        for (const auto& input : inputs) seen += " " + input.subtask->id;
      }
      trace_.push_back({ready, "activate", id, seen});

      AgentState& state = agents_[id];
      state.activated = true;
      state.clock = clock;
      state.output_stamp = clock;
      LatticeValue value = primary_value(s, inputs);
      state.output_pool_tick =
          send_message("output:" + id, id, "orchestrator", ready, 0, false);
      record_contribution(id, std::move(value), state.output_pool_tick,
                          s.emission == Emission::Retractive);
      tick = state.output_pool_tick + 1;
    }

    for (std::size_t i = 0; i < spec_.feedbacks.size(); ++i) {
      const FeedbackEdge& edge = spec_.feedbacks[i];
      const std::uint64_t relayed =
          send_message("feedback:" + std::to_string(i), "orchestrator",
                       edge.to, tick, 0, true);
      feedback_delivered_[i] = relayed;
      const std::uint64_t ready = std::max(
          relayed, send_message("followup-assign:" + edge.to, "orchestrator",
                                edge.to, tick, 0, true));
      const SubTask& s = subtask_at(edge.to);
      std::optional<LatticeValue> value = follow_up_value(s, edge, i, true);
      if (value) {
        trace_.push_back({ready, "activate", s.id, "follow-up with feedback"});
        const std::uint64_t pool_tick =
            send_message("followup:" + s.id + ":" + std::to_string(i), s.id,
                         "orchestrator", ready, 0, false);
        record_contribution(s.id, std::move(*value), pool_tick,
                            edge.kind == FeedbackEdge::Kind::Retractive);
        tick = pool_tick + 1;
      } else {
        tick = ready + 1;
      }
    }

    send_message("review", "orchestrator", "collector", tick, 0, true);
    end_tick_ = tick + 1;
    review_supersessions();
  }

  /// The review pass commits one write per exclusive register (the last in
  /// serialization order) and one revision per causal slot (the highest).
  void review_supersessions() {
    std::map<std::string, Contribution*> register_winner;
    std::map<std::string, std::pair<std::uint32_t, Contribution*>> slot_winner;

    for (auto& c : contributions_) {
      if (c.value.kind().tag() == JoinTag::ExclusiveAssign) {
        Contribution*& winner = register_winner[c.value.as_exclusive().register_id];
        if (!winner || winner->serial < c.serial) {
          if (winner) {
            winner->erased = true;
            trace_.push_back({end_tick_, "review-drop", "orchestrator",
                              "superseded write to register '" +
                                  c.value.as_exclusive().register_id + "'"});
          }
          winner = &c;
        }
      } else if (c.value.kind().tag() == JoinTag::CausalAppend) {
        for (const auto& entry : c.value.as_entries()) {
          const std::string slot_id = entry.author + "#" + entry.slot;
          auto [it, inserted] =
              slot_winner.emplace(slot_id, std::make_pair(entry.revision, &c));
          if (!inserted && it->second.first < entry.revision) {
            it->second.second->erased = true;
            trace_.push_back({end_tick_, "review-drop", "orchestrator",
                              "superseded revision of '" + slot_id + "'"});
            it->second = {entry.revision, &c};
          }
        }
      }
    }
  }

  // -- finalization -----------------------------------------------------------

  RunResult finish() {
    RunResult result;
    result.mode = mode_;
    result.final_output = merge_pool();
    const auto [verdict, reason] = evaluate(spec_, result.final_output);
    result.verdict = verdict;
    result.verdict_reason = reason;
    result.messages_total = messages_total_;
    result.messages_coordination = messages_coordination_;
    result.cost_units = messages_total_;
    std::stable_sort(trace_.begin(), trace_.end(),
                     [](const TraceEvent& a, const TraceEvent& b) {
                       return a.tick < b.tick;
                     });
    result.trace = std::move(trace_);
    return result;
  }

  FinalOutput merge_pool() const {
    // Per-subtask fold first, so one agent's main entry and addendum stay a
    // single document.
    std::vector<std::pair<std::string, LatticeValue>> parts;
    for (const auto& s : spec_.subtasks) {
      std::vector<const Contribution*> own;
      for (const auto& c : contributions_) {
        if (!c.erased && c.subtask == s.id) own.push_back(&c);
      }
      std::size_t suffix = 0;
      std::vector<LatticeValue> pending;
      auto flush = [&]() {
        if (pending.empty()) return;
        LatticeValue merged = pending.front();
        for (std::size_t i = 1; i < pending.size(); ++i) {
          merged = join(merged, pending[i]);
        }
        suffix += 1;
        const std::string key =
            suffix == 1 ? s.id : s.id + ":" + std::to_string(suffix);
        parts.emplace_back(key, std::move(merged));
        pending.clear();
      };
      for (const Contribution* c : own) {
        const bool joinable =
            !pending.empty() && pending.front().kind() == c->value.kind() &&
            c->value.kind().tag() != JoinTag::ExclusiveAssign;
        if (!pending.empty() && !joinable) flush();
        if (!pending.empty() &&
            c->value.kind().tag() == JoinTag::ExclusiveAssign) {
          flush();
        }
        pending.push_back(c->value);
      }
      flush();
    }

    if (parts.empty()) {
      return FinalOutput(FinalOutput::Composite{});
    }

    const JoinKind& first_kind = parts.front().second.kind();
    const bool uniform =
        std::all_of(parts.begin(), parts.end(), [&](const auto& p) {
          return p.second.kind() == first_kind;
        });

    if (uniform && first_kind.tag() != JoinTag::ExclusiveAssign) {
      LatticeValue merged = parts.front().second;
      for (std::size_t i = 1; i < parts.size(); ++i) {
        merged = join(merged, parts[i].second);
      }
      return FinalOutput(std::move(merged));
    }
    if (uniform && first_kind.tag() == JoinTag::ExclusiveAssign) {
      // A single agreed write merges; disagreement stays visible.
      bool all_equal = std::all_of(
          parts.begin(), parts.end(),
          [&](const auto& p) { return p.second == parts.front().second; });
      if (all_equal) {
        return FinalOutput(parts.front().second);
      }
    }

    FinalOutput::Composite composite;
    for (auto& [key, value] : parts) {
      composite.emplace(std::move(key), std::move(value));
    }
    return FinalOutput(std::move(composite));
  }

  const TaskSpec& spec_;
  ScheduleMode mode_;
  const Schedule& schedule_;

  std::map<std::string, const SubTask*> index_by_id_;
  std::map<std::string, AgentState> agents_;
  std::map<std::string, Rational> remaining_;
  std::vector<Contribution> contributions_;
  std::vector<std::uint64_t> feedback_delivered_;
  std::vector<TraceEvent> trace_;
  std::uint64_t messages_total_ = 0;
  std::uint64_t messages_coordination_ = 0;
  std::size_t next_serial_ = 0;
  std::uint64_t end_tick_ = 0;
};

}  // namespace

// ---------------------------------------------------------------------------
// evaluate

namespace {

void collect_values(const LatticeValue& value,
                    std::vector<const LatticeValue*>& out) {
  out.push_back(&value);
  if (value.kind().tag() == JoinTag::MapOfJoins) {
    for (const auto& [_, nested] : value.as_map()) {
      collect_values(nested, out);
    }
  }
}

std::vector<const LatticeValue*> all_values(const FinalOutput& output) {
  std::vector<const LatticeValue*> out;
  for (const LatticeValue* member : output.members()) {
    collect_values(*member, out);
  }
  return out;
}

std::set<std::string> parts_of(const FinalOutput& output) {
  std::set<std::string> parts;
  for (const LatticeValue* value : all_values(output)) {
    switch (value->kind().tag()) {
      case JoinTag::SetUnion:
        parts.insert(value->as_set().begin(), value->as_set().end());
        break;
      case JoinTag::MapOfJoins:
        for (const auto& [key, _] : value->as_map()) parts.insert(key);
        break;
      case JoinTag::CausalAppend:
        for (const auto& entry : value->as_entries()) {
          parts.insert(entry.author);
        }
        break;
      case JoinTag::ExclusiveAssign:
        parts.insert(value->as_exclusive().register_id);
        break;
      default:
        break;
    }
  }
  return parts;
}

std::optional<std::string> check_merge_integrity(const FinalOutput& output) {
  std::map<std::string, std::set<std::string>> register_values;
  std::map<std::string, std::set<std::pair<std::uint32_t, std::string>>>
      slot_revisions;
  for (const LatticeValue* value : all_values(output)) {
    if (value->kind().tag() == JoinTag::ExclusiveAssign) {
      register_values[value->as_exclusive().register_id].insert(
          value->as_exclusive().value);
    } else if (value->kind().tag() == JoinTag::CausalAppend) {
      for (const auto& entry : value->as_entries()) {
        slot_revisions[entry.author + "#" + entry.slot].emplace(
            entry.revision, entry.text);
      }
    }
  }
  for (const auto& [register_id, values] : register_values) {
    if (values.size() > 1) {
      return "exclusive register '" + register_id + "': " +
             std::to_string(values.size()) +
             " conflicting writes need arbitration";
    }
  }
  for (const auto& [slot, revisions] : slot_revisions) {
    if (revisions.size() > 1) {
      return "slot '" + slot + "': retracted revision survived merge";
    }
  }
  return std::nullopt;
}

std::map<std::string, const CausalEntry*> index_entries(
    const FinalOutput& output) {
  std::map<std::string, const CausalEntry*> index;
  for (const LatticeValue* value : all_values(output)) {
    if (value->kind().tag() != JoinTag::CausalAppend) continue;
    for (const auto& entry : value->as_entries()) {
      index.emplace(entry.key(), &entry);
    }
  }
  return index;
}

std::optional<std::string> check_predicate(const TaskSpec& spec,
                                           const ValidityPredicate& predicate,
                                           const FinalOutput& output);

std::optional<std::string> check_causal_refs(const TaskSpec& spec,
                                             const FinalOutput& output) {
  const auto entries = index_entries(output);

  for (const auto& [key, entry] : entries) {
    for (const auto& ref : entry->refs) {
      if (!entries.count(ref)) {
        return "subtask '" + entry->author + "': dangling reference '" + ref +
               "'";
      }
    }
  }

  auto find_best = [&](const std::string& author,
                       const std::string& slot) -> const CausalEntry* {
    const CausalEntry* best = nullptr;
    for (const auto& [_, entry] : entries) {
      if (entry->author == author && entry->slot == slot &&
          (!best || best->revision < entry->revision)) {
        best = entry;
      }
    }
    return best;
  };

  auto has_ref_to = [](const CausalEntry& entry, const std::string& author) {
    const std::string prefix = author + "#main#";
    return std::any_of(entry.refs.begin(), entry.refs.end(),
                       [&](const std::string& ref) {
                         return ref.rfind(prefix, 0) == 0;
                       });
  };

  for (const auto& s : spec.subtasks) {
    const CausalEntry* own = find_best(s.id, "main");
    if (!own) continue;
    for (const auto& consumed : s.consumes) {
      if (!find_best(consumed, "main")) continue;  // producer not causal
      if (!has_ref_to(*own, consumed)) {
        return "subtask '" + s.id + "': entry missing reference to '" +
               consumed + "'";
      }
    }
  }

  for (std::size_t i = 0; i < spec.feedbacks.size(); ++i) {
    const FeedbackEdge& edge = spec.feedbacks[i];
    if (edge.kind != FeedbackEdge::Kind::Additive) continue;
    if (!find_best(edge.from, "main")) continue;
    const CausalEntry* addendum =
        find_best(edge.to, "addendum:" + std::to_string(i));
    if (!addendum) continue;  // upstream had nothing to add
    if (!has_ref_to(*addendum, edge.from)) {
      return "subtask '" + edge.to + "': feedback addendum missing reference "
             "to '" + edge.from + "'";
    }
  }
  return std::nullopt;
}

std::optional<std::string> check_resource_cap(const TaskSpec& spec,
                                              const std::string& resource,
                                              const FinalOutput& output) {
  const ResourceConstraint* constraint = spec.find_resource(resource);
  if (!constraint) {
    return "unknown resource '" + resource + "'";
  }
  const std::string prefix = resource + "/";
  Rational total(0);
  for (const LatticeValue* value : all_values(output)) {
    if (value->kind().tag() != JoinTag::MapOfJoins) continue;
    for (const auto& [key, cell] : value->as_map()) {
      if (key.rfind(prefix, 0) != 0) continue;
      if (cell.kind().tag() == JoinTag::MaxRegister ||
          cell.kind().tag() == JoinTag::MinRegister) {
        total += cell.as_register();
      }
    }
  }
  if (total > constraint->capacity) {
    return "resource '" + resource + "': allocated " + format_rational(total) +
           " > capacity " + format_rational(constraint->capacity);
  }
  return std::nullopt;
}

std::optional<std::string> check_predicate(const TaskSpec& spec,
                                           const ValidityPredicate& predicate,
                                           const FinalOutput& output) {
  switch (predicate.kind) {
    case ValidityPredicate::Kind::AllPartsPresent: {
      const std::set<std::string> present = parts_of(output);
      for (const auto& part : predicate.parts) {
        if (!present.count(part)) {
          return "missing part '" + part + "'";
        }
      }
      return std::nullopt;
    }
    case ValidityPredicate::Kind::ResourceCapRespected:
      return check_resource_cap(spec, predicate.resource, output);
    case ValidityPredicate::Kind::CausalReferenceIntact:
      return check_causal_refs(spec, output);
    case ValidityPredicate::Kind::Conjunction:
      for (const auto& clause : predicate.clauses) {
        if (auto failure = check_predicate(spec, clause, output)) {
          return failure;
        }
      }
      return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace

std::pair<Verdict, std::string> evaluate(const TaskSpec& spec,
                                         const FinalOutput& output) {
  if (auto conflict = check_merge_integrity(output)) {
    return {Verdict::Invalid, *conflict};
  }
  if (auto failure = check_predicate(spec, spec.validity, output)) {
    return {Verdict::Invalid, *failure};
  }
  return {Verdict::Valid, ""};
}

// ---------------------------------------------------------------------------
// entry points

RunResult run_with_schedule(const TaskSpec& spec, ScheduleMode mode,
                            const Schedule& schedule, std::uint64_t seed) {
  Simulation simulation(spec, mode, schedule);
  RunResult result = simulation.execute();
  result.seed = seed;
  return result;
}

RunResult run(const TaskSpec& spec, ScheduleMode mode, std::uint64_t seed) {
  return run_with_schedule(spec, mode, seeded_schedule(spec, seed), seed);
}

std::vector<RunResult> enumerate_runs(const TaskSpec& spec, ScheduleMode mode,
                                      std::size_t limit) {
  if (limit < 1) {
    throw DomainError("enumerate_runs needs limit >= 1");
  }
  std::vector<RunResult> results;
  if (mode == ScheduleMode::Orchestrated) {
    // Serialization leaves exactly one interleaving.
    results.push_back(run_with_schedule(spec, mode, default_schedule(spec), 0));
    return results;
  }
  if (message_event_count(spec) <= kExhaustiveEventLimit) {
    const std::vector<Schedule> schedules = exhaustive_schedules(spec);
    results.reserve(schedules.size());
    for (std::size_t i = 0; i < schedules.size(); ++i) {
      results.push_back(run_with_schedule(spec, mode, schedules[i], i));
    }
    return results;
  }
  results.reserve(limit);
  for (std::uint64_t seed = 0; seed < limit; ++seed) {
    results.push_back(run(spec, mode, seed));
  }
  return results;
}

Rational measure_c(const TaskSpec& spec, std::size_t repetitions) {
  if (repetitions < 1) {
    throw DomainError("measure_c needs repetitions >= 1");
  }
  if (spec.subtasks.empty()) {
    throw DomainError("measure_c needs a spec with at least one subtask");
  }
  Rational orchestrated_total(0);
  Rational uncoordinated_total(0);
  for (std::uint64_t seed = 0; seed < repetitions; ++seed) {
    orchestrated_total +=
        Rational(run(spec, ScheduleMode::Orchestrated, seed).cost_units);
    uncoordinated_total +=
        Rational(run(spec, ScheduleMode::Uncoordinated, seed).cost_units);
  }
  return orchestrated_total / uncoordinated_total;
}

RunResult inject_partition(const TaskSpec& spec, ScheduleMode mode,
                           const PartitionPlan& plan, std::uint64_t seed) {
  Schedule schedule = seeded_schedule(spec, seed);
  schedule.partitions = plan;
  return run_with_schedule(spec, mode, schedule, seed);
}

ModeSummary summarize_runs(const std::vector<RunResult>& results) {
  ModeSummary summary;
  summary.runs = results.size();
  Rational cost_total(0);
  for (const auto& result : results) {
    if (result.verdict == Verdict::Valid) summary.valid += 1;
    cost_total += Rational(result.cost_units);
  }
  if (!results.empty()) {
    summary.validity_rate = Rational(summary.valid, results.size());
    summary.mean_cost = cost_total / Rational(results.size());
  }
  return summary;
}

}  // namespace calmtier

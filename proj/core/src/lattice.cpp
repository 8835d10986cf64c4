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

#include "calmtier/lattice.hpp"

#include <algorithm>
#include <utility>

#include <nlohmann/json.hpp>

namespace calmtier {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// JoinKind

JoinKind JoinKind::map_of(JoinKind inner) {
  if (inner.depth() + 1 > kMaxDepth) {
    throw ValueError("map_of_joins nesting exceeds depth " +
                     std::to_string(kMaxDepth));
  }
  JoinKind kind(JoinTag::MapOfJoins);
  kind.inner_ = std::make_shared<const JoinKind>(std::move(inner));
  return kind;
}

const JoinKind& JoinKind::inner() const {
  if (tag_ != JoinTag::MapOfJoins || !inner_) {
    throw ValueError("inner() is defined for map_of_joins only");
  }
  return *inner_;
}

int JoinKind::depth() const {
  return tag_ == JoinTag::MapOfJoins ? inner().depth() + 1 : 1;
}

bool JoinKind::inflationary() const {
  switch (tag_) {
    case JoinTag::SetUnion:
    case JoinTag::MaxRegister:
    case JoinTag::MinRegister:
    case JoinTag::GrowCounter:
      return true;
    case JoinTag::MapOfJoins:
      return inner().inflationary();
    case JoinTag::CausalAppend:
    case JoinTag::ExclusiveAssign:
      return false;
  }
  return false;
}

std::string JoinKind::name() const {
  switch (tag_) {
    case JoinTag::SetUnion:
      return "set_union";
    case JoinTag::MaxRegister:
      return "max_register";
    case JoinTag::MinRegister:
      return "min_register";
    case JoinTag::MapOfJoins:
      return "map_of_joins<" + inner().name() + ">";
    case JoinTag::GrowCounter:
      return "grow_counter";
    case JoinTag::CausalAppend:
      return "causal_append";
    case JoinTag::ExclusiveAssign:
      return "exclusive_assign";
  }
  return "?";
}

bool JoinKind::operator==(const JoinKind& other) const {
  if (tag_ != other.tag_) return false;
  if (tag_ == JoinTag::MapOfJoins) return inner() == other.inner();
  return true;
}

json JoinKind::to_json() const {
  if (tag_ == JoinTag::MapOfJoins) {
    return json{{"kind", "map_of_joins"}, {"inner", inner().to_json()}};
  }
  std::string flat = name();
  return json(flat);
}

JoinKind JoinKind::from_json(const json& j) {
  if (j.is_string()) {
    const std::string& name = j.get_ref<const std::string&>();
    if (name == "set_union") return set_union();
    if (name == "max_register") return max_register();
    if (name == "min_register") return min_register();
    if (name == "grow_counter") return grow_counter();
    if (name == "causal_append") return causal_append();
    if (name == "exclusive_assign") return exclusive_assign();
    throw SchemaError("unknown join kind '" + name + "'");
  }
  if (j.is_object()) {
    if (!j.contains("kind") || !j["kind"].is_string()) {
      throw SchemaError("join kind object needs a 'kind' string");
    }
    if (j["kind"].get<std::string>() != "map_of_joins") {
      throw SchemaError("only map_of_joins uses the object form");
    }
    if (!j.contains("inner")) {
      throw SchemaError("map_of_joins needs 'inner'");
    }
    for (const auto& [key, _] : j.items()) {
      if (key != "kind" && key != "inner") {
        throw SchemaError("unknown key '" + key + "' in join kind");
      }
    }
    return map_of(from_json(j["inner"]));
  }
  throw SchemaError("join kind must be a string or a map_of_joins object");
}

// ---------------------------------------------------------------------------
// CausalEntry

std::string CausalEntry::key() const {
  return author + "#" + slot + "#" + std::to_string(revision);
}

// ---------------------------------------------------------------------------
// LatticeValue construction

LatticeValue LatticeValue::set_of(Set items) {
  return LatticeValue(JoinKind::set_union(), std::move(items));
}

LatticeValue LatticeValue::max_of(Rational value) {
  return LatticeValue(JoinKind::max_register(), std::move(value));
}

LatticeValue LatticeValue::min_of(Rational value) {
  return LatticeValue(JoinKind::min_register(), std::move(value));
}

LatticeValue LatticeValue::counter_of(std::uint64_t value) {
  return LatticeValue(JoinKind::grow_counter(), value);
}

LatticeValue LatticeValue::map_of(JoinKind inner, Map entries) {
  for (const auto& [key, value] : entries) {
    if (value.kind() != inner) {
      throw KindMismatch("map entry '" + key + "' is " + value.kind().name() +
                         ", expected " + inner.name());
    }
  }
  return LatticeValue(JoinKind::map_of(std::move(inner)), std::move(entries));
}

LatticeValue LatticeValue::causal_of(Entries entries) {
  std::sort(entries.begin(), entries.end());
  entries.erase(std::unique(entries.begin(), entries.end()), entries.end());
  return LatticeValue(JoinKind::causal_append(), std::move(entries));
}

LatticeValue LatticeValue::exclusive_of(ExclusiveWrite write) {
  return LatticeValue(JoinKind::exclusive_assign(), std::move(write));
}

bool LatticeValue::operator==(const LatticeValue& other) const {
  return kind_ == other.kind_ && payload_ == other.payload_;
}

// ---------------------------------------------------------------------------
// join / leq / merge_all

LatticeValue join(const LatticeValue& a, const LatticeValue& b) {
  if (a.kind() != b.kind()) {
    throw KindMismatch("join of " + a.kind().name() + " with " +
                       b.kind().name());
  }
  switch (a.kind().tag()) {
    case JoinTag::SetUnion: {
      LatticeValue::Set merged = a.as_set();
      merged.insert(b.as_set().begin(), b.as_set().end());
      return LatticeValue::set_of(std::move(merged));
    }
    case JoinTag::MaxRegister:
      return LatticeValue::max_of(std::max(a.as_register(), b.as_register()));
    case JoinTag::MinRegister:
      return LatticeValue::min_of(std::min(a.as_register(), b.as_register()));
    case JoinTag::GrowCounter:
      return LatticeValue::counter_of(std::max(a.as_counter(), b.as_counter()));
    case JoinTag::MapOfJoins: {
      LatticeValue::Map merged = a.as_map();
      for (const auto& [key, value] : b.as_map()) {
        auto [it, inserted] = merged.emplace(key, value);
        if (!inserted) {
          it->second = join(it->second, value);
        }
      }
      return LatticeValue::map_of(a.kind().inner(), std::move(merged));
    }
    case JoinTag::CausalAppend: {
      LatticeValue::Entries merged = a.as_entries();
      merged.insert(merged.end(), b.as_entries().begin(),
                    b.as_entries().end());
      return LatticeValue::causal_of(std::move(merged));
    }
    case JoinTag::ExclusiveAssign:
      throw NotASemilattice("exclusive_assign has no join");
  }
  throw KindMismatch("unreachable join tag");
}

bool leq(const LatticeValue& a, const LatticeValue& b) {
  return join(a, b) == b;
}

LatticeValue merge_all(std::span<const LatticeValue> values) {
  if (values.empty()) {
    throw EmptyInput("merge_all of zero values");
  }
  LatticeValue acc = values.front();
  for (std::size_t i = 1; i < values.size(); ++i) {
    acc = join(acc, values[i]);
  }
  return acc;
}

// ---------------------------------------------------------------------------
// JSON

json LatticeValue::to_json() const {
  json payload;
  switch (kind_.tag()) {
    case JoinTag::SetUnion:
      payload = json::array();
      for (const auto& item : as_set()) payload.push_back(item);  // sorted
      break;
    case JoinTag::MaxRegister:
    case JoinTag::MinRegister: {
      const Rational& r = as_register();
      if (r.denominator() == 1) {
        payload = r.numerator();
      } else {
        payload = format_rational(r);
      }
      break;
    }
    case JoinTag::GrowCounter:
      payload = as_counter();
      break;
    case JoinTag::MapOfJoins: {
      payload = json::object();
      for (const auto& [key, value] : as_map()) {
        payload[key] = value.to_json();
      }
      break;
    }
    case JoinTag::CausalAppend: {
      payload = json::array();
      for (const auto& entry : as_entries()) {
        payload.push_back(json{{"author", entry.author},
                               {"slot", entry.slot},
                               {"revision", entry.revision},
                               {"refs", entry.refs},
                               {"text", entry.text}});
      }
      break;
    }
    case JoinTag::ExclusiveAssign:
      payload = json{{"register", as_exclusive().register_id},
                     {"value", as_exclusive().value}};
      break;
  }
  return json{{"kind", kind_.to_json()}, {"payload", std::move(payload)}};
}

LatticeValue LatticeValue::from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind") || !j.contains("payload")) {
    throw SchemaError("lattice value needs 'kind' and 'payload'");
  }
  for (const auto& [key, _] : j.items()) {
    if (key != "kind" && key != "payload") {
      throw SchemaError("unknown key '" + key + "' in lattice value");
    }
  }
  const JoinKind kind = JoinKind::from_json(j["kind"]);
  const json& payload = j["payload"];

  auto parse_register = [&]() -> Rational {
    if (payload.is_number_integer()) {
      return Rational(payload.get<std::int64_t>());
    }
    if (payload.is_string()) {
      return parse_rational(payload.get<std::string>());
    }
    throw SchemaError("register payload must be an integer or 'p/q' string");
  };

  switch (kind.tag()) {
    case JoinTag::SetUnion: {
      if (!payload.is_array()) throw SchemaError("set payload must be a list");
      Set items;
      for (const auto& item : payload) {
        if (!item.is_string()) throw SchemaError("set items must be strings");
        items.insert(item.get<std::string>());
      }
      return set_of(std::move(items));
    }
    case JoinTag::MaxRegister:
      return max_of(parse_register());
    case JoinTag::MinRegister:
      return min_of(parse_register());
    case JoinTag::GrowCounter: {
      if (!payload.is_number_integer() || payload.get<std::int64_t>() < 0) {
        throw ValueError("grow_counter payload must be a non-negative integer");
      }
      return counter_of(payload.get<std::uint64_t>());
    }
    case JoinTag::MapOfJoins: {
      if (!payload.is_object()) throw SchemaError("map payload must be an object");
      Map entries;
      for (const auto& [key, value] : payload.items()) {
        entries.emplace(key, from_json(value));
      }
      return map_of(kind.inner(), std::move(entries));
    }
    case JoinTag::CausalAppend: {
      if (!payload.is_array()) {
        throw SchemaError("causal_append payload must be a list");
      }
      Entries entries;
      for (const auto& e : payload) {
        CausalEntry entry;
        entry.author = e.at("author").get<std::string>();
        entry.slot = e.value("slot", std::string("main"));
        entry.revision = e.value("revision", 1u);
        if (e.contains("refs")) {
          entry.refs = e["refs"].get<std::vector<std::string>>();
        }
        entry.text = e.value("text", std::string{});
        entries.push_back(std::move(entry));
      }
      return causal_of(std::move(entries));
    }
    case JoinTag::ExclusiveAssign: {
      if (!payload.is_object() || !payload.contains("register") ||
          !payload.contains("value")) {
        throw SchemaError("exclusive payload needs 'register' and 'value'");
      }
      return exclusive_of(ExclusiveWrite{
          payload["register"].get<std::string>(),
          payload["value"].get<std::string>()});
    }
  }
  throw SchemaError("unreachable lattice kind");
}

}  // namespace calmtier

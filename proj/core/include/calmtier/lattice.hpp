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

#ifndef CALMTIER_LATTICE_HPP_
#define CALMTIER_LATTICE_HPP_

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "calmtier/errors.hpp"
#include "calmtier/rational.hpp"

namespace calmtier {

enum class JoinTag {
  SetUnion,
  MaxRegister,
  MinRegister,
  MapOfJoins,
  GrowCounter,
  CausalAppend,
  ExclusiveAssign,
};

/// Value-domain descriptor for a sub-task output. MapOfJoins nests an inner
/// kind; nesting depth is capped at 8 so validation stays total.
class JoinKind {
 public:
  static constexpr int kMaxDepth = 8;

  static JoinKind set_union() { return JoinKind(JoinTag::SetUnion); }
  static JoinKind max_register() { return JoinKind(JoinTag::MaxRegister); }
  static JoinKind min_register() { return JoinKind(JoinTag::MinRegister); }
  static JoinKind grow_counter() { return JoinKind(JoinTag::GrowCounter); }
  static JoinKind causal_append() { return JoinKind(JoinTag::CausalAppend); }
  static JoinKind exclusive_assign() {
    return JoinKind(JoinTag::ExclusiveAssign);
  }
  static JoinKind map_of(JoinKind inner);

  JoinTag tag() const { return tag_; }
  const JoinKind& inner() const;
  int depth() const;

  /// True for the five kinds whose join is an inflationary semilattice.
  /// CausalAppend merges only under causal delivery; ExclusiveAssign does
  /// not merge at all.
  bool inflationary() const;

  std::string name() const;

  bool operator==(const JoinKind& other) const;
  bool operator!=(const JoinKind& other) const { return !(*this == other); }

  nlohmann::json to_json() const;
  static JoinKind from_json(const nlohmann::json& j);

 private:
  explicit JoinKind(JoinTag tag) : tag_(tag) {}

  JoinTag tag_;
  std::shared_ptr<const JoinKind> inner_;  // MapOfJoins only
};

/// One stamped element of a CausalAppend document. `refs` lists the keys of
/// the entries the author had incorporated when it wrote this one.
struct CausalEntry {
  std::string author;
  std::string slot = "main";
  std::uint32_t revision = 1;
  std::vector<std::string> refs;
  std::string text;

  /// "author#slot#revision" — the stable merge and reference key.
  std::string key() const;

  auto operator<=>(const CausalEntry&) const = default;
};

/// Single-owner register write. Two distinct writes to the same register
/// cannot be joined; arbitration is the orchestrator's job.
struct ExclusiveWrite {
  std::string register_id;
  std::string value;

  auto operator<=>(const ExclusiveWrite&) const = default;
};

class LatticeValue {
 public:
  using Set = std::set<std::string>;
  using Map = std::map<std::string, LatticeValue>;
  using Entries = std::vector<CausalEntry>;

  LatticeValue() : kind_(JoinKind::set_union()), payload_(Set{}) {}

  static LatticeValue set_of(Set items);
  static LatticeValue max_of(Rational value);
  static LatticeValue min_of(Rational value);
  static LatticeValue counter_of(std::uint64_t value);
  static LatticeValue map_of(JoinKind inner, Map entries);
  static LatticeValue causal_of(Entries entries);
  static LatticeValue exclusive_of(ExclusiveWrite write);

  const JoinKind& kind() const { return kind_; }

  const Set& as_set() const { return std::get<Set>(payload_); }
  const Rational& as_register() const { return std::get<Rational>(payload_); }
  std::uint64_t as_counter() const { return std::get<std::uint64_t>(payload_); }
  const Map& as_map() const { return std::get<Map>(payload_); }
  const Entries& as_entries() const { return std::get<Entries>(payload_); }
  const ExclusiveWrite& as_exclusive() const {
    return std::get<ExclusiveWrite>(payload_);
  }

  bool operator==(const LatticeValue& other) const;
  bool operator!=(const LatticeValue& other) const { return !(*this == other); }

  nlohmann::json to_json() const;
  static LatticeValue from_json(const nlohmann::json& j);

 private:
  LatticeValue(JoinKind kind,
               std::variant<Set, Rational, std::uint64_t, Map, Entries,
                            ExclusiveWrite>
                   payload)
      : kind_(std::move(kind)), payload_(std::move(payload)) {}

  JoinKind kind_;
  std::variant<Set, Rational, std::uint64_t, Map, Entries, ExclusiveWrite>
      payload_;
};

/// Least upper bound. Throws KindMismatch when the kinds differ and
/// NotASemilattice for ExclusiveAssign. CausalAppend joins as a keyed union
/// of stamped entries; whether the result is *meaningful* depends on the
/// delivery discipline, which is the engine's concern, not the algebra's.
LatticeValue join(const LatticeValue& a, const LatticeValue& b);

/// Lattice order: leq(a, b) iff join(a, b) == b.
bool leq(const LatticeValue& a, const LatticeValue& b);

/// Fold of join over a non-empty, uniform-kind list. Order-independent.
LatticeValue merge_all(std::span<const LatticeValue> values);

}  // namespace calmtier

#endif  // CALMTIER_LATTICE_HPP_

#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace genplan::pddl {

using ObjectId = std::uint32_t;
using PredicateId = std::uint32_t;
using TypeId = std::uint32_t;

inline constexpr std::string_view kUniversalType = "object";

struct PredicateSchema {
  std::string name;
  int arity = 0;
  std::vector<std::string> param_types;

  bool operator==(const PredicateSchema&) const = default;
};

// An atom inside an action schema; arguments are indices into the schema's
// parameter list.
struct SchemaAtom {
  PredicateId predicate = 0;
  std::vector<int> params;

  bool operator==(const SchemaAtom&) const = default;
};

struct Parameter {
  std::string name;
  std::string type;

  bool operator==(const Parameter&) const = default;
};

struct ActionSchema {
  std::string name;
  std::vector<Parameter> params;
  std::vector<SchemaAtom> pre;
  std::vector<SchemaAtom> add;
  std::vector<SchemaAtom> del;

  bool operator==(const ActionSchema&) const = default;
};

struct DomainDef {
  std::string name;
  std::vector<std::string> requirements;
  // types[0] is always the universal type; parents[i] indexes into types and
  // is empty only for the root.
  std::vector<std::string> types{std::string(kUniversalType)};
  std::vector<std::optional<TypeId>> parents{std::nullopt};
  std::vector<PredicateSchema> predicates;
  std::vector<ActionSchema> actions;

  bool operator==(const DomainDef&) const = default;

  std::optional<TypeId> type_id(std::string_view t) const {
    for (std::size_t i = 0; i < types.size(); ++i)
      if (types[i] == t) return static_cast<TypeId>(i);
    return std::nullopt;
  }

  std::optional<PredicateId> predicate_id(std::string_view p) const {
    for (std::size_t i = 0; i < predicates.size(); ++i)
      if (predicates[i].name == p) return static_cast<PredicateId>(i);
    return std::nullopt;
  }

  bool is_subtype(TypeId t, TypeId ancestor) const {
    for (std::optional<TypeId> cur = t; cur; cur = parents[*cur])
      if (*cur == ancestor) return true;
    return false;
  }

  bool is_subtype(std::string_view t, std::string_view ancestor) const {
    auto a = type_id(t), b = type_id(ancestor);
    return a && b && is_subtype(*a, *b);
  }
};

struct GroundAtom {
  PredicateId predicate = 0;
  std::uint8_t arity = 0;
  std::array<ObjectId, 2> args{0, 0};

  GroundAtom() = default;
  explicit GroundAtom(PredicateId p) : predicate(p) {}
  GroundAtom(PredicateId p, ObjectId a) : predicate(p), arity(1), args{a, 0} {}
  GroundAtom(PredicateId p, ObjectId a, ObjectId b) : predicate(p), arity(2), args{a, b} {}

  auto operator<=>(const GroundAtom&) const = default;
};

struct ObjectDecl {
  std::string name;
  std::string type;

  bool operator==(const ObjectDecl&) const = default;
};

struct ProblemDef {
  std::string name;
  std::string domain_name;
  std::vector<ObjectDecl> objects;
  std::vector<GroundAtom> init;  // sorted, unique
  std::vector<GroundAtom> goal;  // sorted, unique

  bool operator==(const ProblemDef&) const = default;

  std::optional<ObjectId> object_id(std::string_view o) const {
    for (std::size_t i = 0; i < objects.size(); ++i)
      if (objects[i].name == o) return static_cast<ObjectId>(i);
    return std::nullopt;
  }
};

inline void normalize_atoms(std::vector<GroundAtom>& atoms) {
  std::sort(atoms.begin(), atoms.end());
  atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
}

}  // namespace genplan::pddl

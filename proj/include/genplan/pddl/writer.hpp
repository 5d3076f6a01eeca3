#pragma once

#include <sstream>
#include <string>

#include "genplan/pddl/types.hpp"

namespace genplan::pddl {

namespace detail {

inline void write_schema_atom(std::ostream& os, const DomainDef& d, const ActionSchema& a,
                              const SchemaAtom& atom) {
  os << '(' << d.predicates[atom.predicate].name;
  for (int p : atom.params) os << ' ' << a.params[p].name;
  os << ')';
}

}  // namespace detail

inline std::string atom_to_string(const GroundAtom& atom, const DomainDef& d,
                                  const ProblemDef& p) {
  std::string out = "(" + d.predicates[atom.predicate].name;
  for (int i = 0; i < atom.arity; ++i) out += " " + p.objects[atom.args[i]].name;
  return out + ")";
}

inline std::string to_pddl(const DomainDef& d) {
  std::ostringstream os;
  os << "(define (domain " << d.name << ")\n";
  if (!d.requirements.empty()) {
    os << "  (:requirements";
    for (const auto& r : d.requirements) os << ' ' << r;
    os << ")\n";
  }
  if (d.types.size() > 1) {
    os << "  (:types";
    for (std::size_t i = 1; i < d.types.size(); ++i)
      os << ' ' << d.types[i] << " - " << d.types[*d.parents[i]];
    os << ")\n";
  }
  os << "  (:predicates";
  for (const auto& p : d.predicates) {
    os << "\n    (" << p.name;
    for (int i = 0; i < p.arity; ++i) os << " ?a" << i << " - " << p.param_types[i];
    os << ')';
  }
  os << ")\n";
  for (const auto& a : d.actions) {
    os << "  (:action " << a.name << "\n    :parameters (";
    for (std::size_t i = 0; i < a.params.size(); ++i)
      os << (i ? " " : "") << a.params[i].name << " - " << a.params[i].type;
    os << ")\n    :precondition (and";
    for (const auto& atom : a.pre) {
      os << ' ';
      detail::write_schema_atom(os, d, a, atom);
    }
    os << ")\n    :effect (and";
    for (const auto& atom : a.add) {
      os << ' ';
      detail::write_schema_atom(os, d, a, atom);
    }
    for (const auto& atom : a.del) {
      os << " (not ";
      detail::write_schema_atom(os, d, a, atom);
      os << ')';
    }
    os << "))\n";
  }
  os << ")\n";
  return os.str();
}

inline std::string to_pddl(const ProblemDef& p, const DomainDef& d) {
  std::ostringstream os;
  os << "(define (problem " << p.name << ")\n  (:domain " << p.domain_name << ")\n  (:objects";
  for (const auto& o : p.objects) os << ' ' << o.name << " - " << o.type;
  os << ")\n  (:init";
  for (const auto& a : p.init) os << "\n    " << atom_to_string(a, d, p);
  os << ")\n  (:goal (and";
  for (const auto& a : p.goal) os << "\n    " << atom_to_string(a, d, p);
  os << ")))\n";
  return os.str();
}

}  // namespace genplan::pddl

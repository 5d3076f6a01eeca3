#pragma once

#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "genplan/errors.hpp"
#include "genplan/pddl/sexpr.hpp"
#include "genplan/pddl/types.hpp"

namespace genplan::pddl {

namespace detail {

inline const std::set<std::string, std::less<>>& supported_requirements() {
  static const std::set<std::string, std::less<>> reqs{":strips", ":typing"};
  return reqs;
}

// Parses `a b - t c` style lists into (name, type) pairs.
inline std::vector<std::pair<std::string, std::string>> parse_typed_list(
    const SExpr& list, std::size_t first) {
  std::vector<std::pair<std::string, std::string>> out;
  std::vector<std::string> pending;
  for (std::size_t i = first; i < list.size(); ++i) {
    const SExpr& item = list[i];
    if (item.is_list) {
      if (item.has_head("either")) throw UnsupportedFeature("'either' types are not supported");
      item.fail("expected a name in typed list");
    }
    if (item.atom == "-") {
      if (i + 1 >= list.size()) item.fail("missing type after '-'");
      const SExpr& type = list[i + 1];
      if (type.has_head("either")) throw UnsupportedFeature("'either' types are not supported");
      if (type.is_list) type.fail("expected a type name");
      if (pending.empty()) item.fail("'-' without preceding names");
      for (auto& name : pending) out.emplace_back(std::move(name), type.atom);
      pending.clear();
      ++i;
    } else {
      pending.push_back(item.atom);
    }
  }
  for (auto& name : pending) out.emplace_back(std::move(name), std::string(kUniversalType));
  return out;
}

inline TypeId ensure_type(DomainDef& d, const std::string& name) {
  if (auto id = d.type_id(name)) return *id;
  d.types.push_back(name);
  d.parents.push_back(TypeId{0});
  return static_cast<TypeId>(d.types.size() - 1);
}

inline void reject_unsupported_formula(const SExpr& f) {
  static const std::set<std::string, std::less<>> unsupported{
      "or", "imply", "exists", "forall", "when", "increase", "decrease", "assign",
      "scale-up", "scale-down", ">", "<", ">=", "<="};
  if (!f.is_list || f.items.empty() || !f.items[0].is_atom()) return;
  const std::string& head = f.items[0].atom;
  if (head == "=") throw UnsupportedFeature("equality atoms are not supported");
  if (unsupported.count(head)) throw UnsupportedFeature("unsupported construct '" + head + "'");
}

class DomainParser {
 public:
  DomainDef parse(const SExpr& root) {
    if (!root.has_head("define")) root.fail("expected (define ...)");
    if (root.size() < 2 || !root[1].has_head("domain") || root[1].size() != 2 || root[1][1].is_list)
      root.fail("expected (domain <name>)");
    domain_.name = root[1][1].atom;
    for (std::size_t i = 2; i < root.size(); ++i) {
      const SExpr& section = root[i];
      if (!section.is_list || section.items.empty() || section[0].is_list)
        section.fail("expected a domain section");
      const std::string& key = section[0].atom;
      if (key == ":requirements") {
        parse_requirements(section);
      } else if (key == ":types") {
        parse_types(section);
      } else if (key == ":predicates") {
        parse_predicates(section);
      } else if (key == ":action") {
        domain_.actions.push_back(parse_action(section));
      } else if (key == ":constants") {
        throw UnsupportedFeature("domain constants are not supported");
      } else if (key == ":functions") {
        throw UnsupportedFeature("numeric fluents are not supported");
      } else if (key == ":derived" || key == ":axiom") {
        throw UnsupportedFeature("axioms are not supported");
      } else if (key == ":durative-action") {
        throw UnsupportedFeature("durative actions are not supported");
      } else {
        section.fail("unknown domain section '" + key + "'");
      }
    }
    for (const auto& a : domain_.actions)
      if (domain_.predicate_id(a.name))
        throw SyntaxError("action name '" + a.name + "' clashes with a predicate", root.line,
                          root.column);
    return std::move(domain_);
  }

 private:
  void parse_requirements(const SExpr& section) {
    for (std::size_t i = 1; i < section.size(); ++i) {
      const SExpr& r = section[i];
      if (r.is_list) r.fail("expected a requirement flag");
      if (!supported_requirements().count(r.atom))
        throw UnsupportedFeature("requirement " + r.atom + " is not supported");
      domain_.requirements.push_back(r.atom);
    }
  }

  void parse_types(const SExpr& section) {
    // Declared names get ids in declaration order; parent-only names follow.
    auto decls = parse_typed_list(section, 1);
    for (const auto& decl : decls)
      if (decl.first != kUniversalType) ensure_type(domain_, decl.first);
    for (const auto& [name, parent] : decls) {
      TypeId parent_id = ensure_type(domain_, parent);
      if (name != kUniversalType) domain_.parents[*domain_.type_id(name)] = parent_id;
    }
    // Reject cycles introduced by re-parenting.
    for (TypeId t = 0; t < domain_.types.size(); ++t) {
      std::size_t steps = 0;
      for (auto cur = domain_.parents[t]; cur; cur = domain_.parents[*cur])
        if (++steps > domain_.types.size()) section.fail("cyclic type hierarchy");
    }
  }

  void parse_predicates(const SExpr& section) {
    for (std::size_t i = 1; i < section.size(); ++i) {
      const SExpr& p = section[i];
      if (!p.is_list || p.items.empty() || p[0].is_list) p.fail("expected a predicate declaration");
      PredicateSchema schema;
      schema.name = p[0].atom;
      for (auto& [var, type] : parse_typed_list(p, 1)) {
        if (var.empty() || var[0] != '?') p.fail("predicate parameters must be variables");
        if (!domain_.type_id(type)) throw UnknownSymbol("undeclared type '" + type + "'");
        schema.param_types.push_back(type);
      }
      schema.arity = static_cast<int>(schema.param_types.size());
      if (schema.arity > 2)
        throw UnsupportedFeature("predicate '" + schema.name + "' has arity " +
                                 std::to_string(schema.arity) + " (at most 2 supported)");
      if (domain_.predicate_id(schema.name)) p.fail("duplicate predicate '" + schema.name + "'");
      domain_.predicates.push_back(std::move(schema));
    }
  }

  SchemaAtom parse_schema_atom(const SExpr& f, const ActionSchema& action) const {
    reject_unsupported_formula(f);
    if (!f.is_list || f.items.empty() || f[0].is_list) f.fail("expected an atom");
    auto pid = domain_.predicate_id(f[0].atom);
    if (!pid) throw UnknownSymbol("unknown predicate '" + f[0].atom + "' in action " + action.name);
    const PredicateSchema& pred = domain_.predicates[*pid];
    if (static_cast<int>(f.size()) - 1 != pred.arity)
      f.fail("predicate '" + pred.name + "' expects " + std::to_string(pred.arity) + " arguments");
    SchemaAtom atom;
    atom.predicate = *pid;
    for (std::size_t i = 1; i < f.size(); ++i) {
      const SExpr& arg = f[i];
      if (arg.is_list) arg.fail("expected a variable");
      int idx = -1;
      for (std::size_t k = 0; k < action.params.size(); ++k)
        if (action.params[k].name == arg.atom) idx = static_cast<int>(k);
      if (idx < 0) {
        if (!arg.atom.empty() && arg.atom[0] != '?')
          throw UnsupportedFeature("constant '" + arg.atom + "' in action " + action.name);
        throw UnknownSymbol("unbound variable '" + arg.atom + "' in action " + action.name);
      }
      atom.params.push_back(idx);
    }
    return atom;
  }

  void parse_precondition(const SExpr& f, ActionSchema& action) const {
    if (f.is_list && f.items.empty()) return;
    if (f.has_head("and")) {
      for (std::size_t i = 1; i < f.size(); ++i) parse_precondition(f[i], action);
      return;
    }
    if (f.has_head("not")) throw UnsupportedFeature("negative preconditions are not supported");
    action.pre.push_back(parse_schema_atom(f, action));
  }

  void parse_effect(const SExpr& f, ActionSchema& action) const {
    if (f.is_list && f.items.empty()) return;
    if (f.has_head("and")) {
      for (std::size_t i = 1; i < f.size(); ++i) parse_effect(f[i], action);
      return;
    }
    if (f.has_head("not")) {
      if (f.size() != 2) f.fail("malformed (not ...)");
      action.del.push_back(parse_schema_atom(f[1], action));
      return;
    }
    action.add.push_back(parse_schema_atom(f, action));
  }

  ActionSchema parse_action(const SExpr& section) const {
    if (section.size() < 2 || section[1].is_list) section.fail("expected an action name");
    ActionSchema action;
    action.name = section[1].atom;
    const SExpr* pre = nullptr;
    const SExpr* eff = nullptr;
    for (std::size_t i = 2; i < section.size(); i += 2) {
      const SExpr& key = section[i];
      if (key.is_list || i + 1 >= section.size()) key.fail("expected :keyword value pair");
      const SExpr& value = section[i + 1];
      if (key.atom == ":parameters") {
        if (!value.is_list) value.fail("expected a parameter list");
        for (auto& [var, type] : parse_typed_list(value, 0)) {
          if (var.empty() || var[0] != '?') value.fail("parameters must be variables");
          if (!domain_.type_id(type)) throw UnknownSymbol("undeclared type '" + type + "'");
          action.params.push_back({var, type});
        }
      } else if (key.atom == ":precondition") {
        pre = &value;
      } else if (key.atom == ":effect") {
        eff = &value;
      } else {
        key.fail("unknown action field '" + key.atom + "'");
      }
    }
    if (pre) parse_precondition(*pre, action);
    if (eff) parse_effect(*eff, action);
    for (const auto& a : action.add)
      for (const auto& d : action.del)
        if (a == d) section.fail("atom is both added and deleted in action " + action.name);
    return action;
  }

  DomainDef domain_;
};

inline GroundAtom parse_ground_atom(const SExpr& f, const DomainDef& domain,
                                    const ProblemDef& problem) {
  reject_unsupported_formula(f);
  if (f.has_head("not")) throw UnsupportedFeature("negated atoms are not supported");
  if (!f.is_list || f.items.empty() || f[0].is_list) f.fail("expected a ground atom");
  auto pid = domain.predicate_id(f[0].atom);
  if (!pid) throw UnknownSymbol("unknown predicate '" + f[0].atom + "'");
  const PredicateSchema& pred = domain.predicates[*pid];
  if (static_cast<int>(f.size()) - 1 != pred.arity)
    f.fail("predicate '" + pred.name + "' expects " + std::to_string(pred.arity) + " arguments");
  std::array<ObjectId, 2> args{0, 0};
  for (std::size_t i = 1; i < f.size(); ++i) {
    if (f[i].is_list) f[i].fail("expected an object name");
    auto oid = problem.object_id(f[i].atom);
    if (!oid) throw UnknownSymbol("unknown object '" + f[i].atom + "'");
    if (!domain.is_subtype(problem.objects[*oid].type, pred.param_types[i - 1]))
      f[i].fail("object '" + f[i].atom + "' is not of type " + pred.param_types[i - 1]);
    args[i - 1] = *oid;
  }
  switch (pred.arity) {
    case 0: return GroundAtom(*pid);
    case 1: return GroundAtom(*pid, args[0]);
    default: return GroundAtom(*pid, args[0], args[1]);
  }
}

inline void parse_goal(const SExpr& f, const DomainDef& domain, ProblemDef& problem) {
  if (f.is_list && f.items.empty()) return;
  if (f.has_head("and")) {
    for (std::size_t i = 1; i < f.size(); ++i) parse_goal(f[i], domain, problem);
    return;
  }
  problem.goal.push_back(parse_ground_atom(f, domain, problem));
}

}  // namespace detail

inline DomainDef parse_domain(std::string_view text) {
  return detail::DomainParser().parse(parse_sexpr(text));
}

// The name in a problem's (:domain ...) section.
inline std::string problem_domain_name(std::string_view text) {
  const SExpr root = parse_sexpr(text);
  for (std::size_t i = 2; root.is_list && i < root.size(); ++i)
    if (root[i].has_head(":domain") && root[i].size() == 2 && !root[i][1].is_list) return root[i][1].atom;
  root.fail("problem does not name its domain");
}

inline ProblemDef parse_problem(std::string_view text, const DomainDef& domain) {
  const SExpr root = parse_sexpr(text);
  if (!root.has_head("define")) root.fail("expected (define ...)");
  if (root.size() < 2 || !root[1].has_head("problem") || root[1].size() != 2 || root[1][1].is_list)
    root.fail("expected (problem <name>)");
  ProblemDef problem;
  problem.name = root[1][1].atom;
  const SExpr* init = nullptr;
  const SExpr* goal = nullptr;
  for (std::size_t i = 2; i < root.size(); ++i) {
    const SExpr& section = root[i];
    if (!section.is_list || section.items.empty() || section[0].is_list)
      section.fail("expected a problem section");
    const std::string& key = section[0].atom;
    if (key == ":domain") {
      if (section.size() != 2 || section[1].is_list) section.fail("expected (:domain <name>)");
      problem.domain_name = section[1].atom;
      if (problem.domain_name != domain.name)
        throw DomainMismatch("problem is for domain '" + problem.domain_name + "', not '" +
                             domain.name + "'");
    } else if (key == ":objects") {
      for (auto& [name, type] : detail::parse_typed_list(section, 1)) {
        if (!domain.type_id(type)) throw UnknownSymbol("undeclared type '" + type + "'");
        if (problem.object_id(name)) section.fail("duplicate object '" + name + "'");
        problem.objects.push_back({name, type});
      }
    } else if (key == ":init") {
      init = &section;
    } else if (key == ":goal") {
      if (section.size() != 2) section.fail("expected a single goal formula");
      goal = &section[1];
    } else if (key == ":requirements") {
      continue;
    } else if (key == ":metric") {
      throw UnsupportedFeature("plan metrics are not supported");
    } else {
      section.fail("unknown problem section '" + key + "'");
    }
  }
  if (problem.domain_name.empty()) root.fail("problem does not name its domain");
  if (init)
    for (std::size_t i = 1; i < init->size(); ++i)
      problem.init.push_back(detail::parse_ground_atom((*init)[i], domain, problem));
  if (goal) detail::parse_goal(*goal, domain, problem);
  normalize_atoms(problem.init);
  normalize_atoms(problem.goal);
  return problem;
}

}  // namespace genplan::pddl

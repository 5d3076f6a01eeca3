#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "genplan/errors.hpp"
#include "genplan/pddl/types.hpp"

namespace genplan::pddl {

using AtomId = std::uint32_t;
using ActionId = std::uint32_t;

// Dense ids for every ground atom of a domain over a fixed object set:
// id = offset[p] + a0 * n + a1.
class AtomIndex {
 public:
  AtomIndex() = default;
  AtomIndex(const DomainDef& domain, std::size_t num_objects) : num_objects_(num_objects) {
    std::size_t offset = 0;
    for (const auto& p : domain.predicates) {
      offsets_.push_back(offset);
      arities_.push_back(p.arity);
      std::size_t count = 1;
      for (int i = 0; i < p.arity; ++i) count *= num_objects;
      offset += count;
    }
    size_ = offset;
  }

  std::size_t size() const { return size_; }
  std::size_t num_objects() const { return num_objects_; }

  AtomId id(const GroundAtom& a) const {
    std::size_t local = 0;
    for (int i = 0; i < a.arity; ++i) local = local * num_objects_ + a.args[i];
    return static_cast<AtomId>(offsets_[a.predicate] + local);
  }

  GroundAtom decode(AtomId id) const {
    auto it = std::upper_bound(offsets_.begin(), offsets_.end(), static_cast<std::size_t>(id));
    // Zero-sized predicate blocks (arity > 0 with no objects) share offsets;
    // step back to the last block that actually contains the id.
    auto p = static_cast<PredicateId>((it - offsets_.begin()) - 1);
    std::size_t local = id - offsets_[p];
    switch (arities_[p]) {
      case 0: return GroundAtom(p);
      case 1: return GroundAtom(p, static_cast<ObjectId>(local));
      default:
        return GroundAtom(p, static_cast<ObjectId>(local / num_objects_),
                          static_cast<ObjectId>(local % num_objects_));
    }
  }

 private:
  std::size_t num_objects_ = 0;
  std::size_t size_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<int> arities_;
};

// A set of ground atoms stored as a bitset over AtomIndex ids.
class State {
 public:
  State() = default;
  explicit State(std::size_t num_atoms) : bits_((num_atoms + 63) / 64, 0) {}

  bool contains(AtomId a) const { return (bits_[a >> 6] >> (a & 63)) & 1u; }
  void insert(AtomId a) { bits_[a >> 6] |= std::uint64_t{1} << (a & 63); }
  void erase(AtomId a) { bits_[a >> 6] &= ~(std::uint64_t{1} << (a & 63)); }

  bool contains_all(std::span<const AtomId> atoms) const {
    for (AtomId a : atoms)
      if (!contains(a)) return false;
    return true;
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto w : bits_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  std::vector<AtomId> atoms() const {
    std::vector<AtomId> out;
    for (std::size_t w = 0; w < bits_.size(); ++w)
      for (std::uint64_t word = bits_[w]; word; word &= word - 1)
        out.push_back(static_cast<AtomId>(w * 64 + static_cast<std::size_t>(std::countr_zero(word))));
    return out;
  }

  std::span<const std::uint64_t> words() const { return bits_; }
  std::span<std::uint64_t> words() { return bits_; }

  bool operator==(const State&) const = default;

  std::size_t hash() const {
    std::size_t h = 0xcbf29ce484222325ull;
    for (auto w : bits_) {
      h ^= w + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return h;
  }

 private:
  std::vector<std::uint64_t> bits_;
};

struct StateHash {
  std::size_t operator()(const State& s) const { return s.hash(); }
};

struct GroundAction {
  std::uint32_t schema = 0;
  std::vector<ObjectId> binding;
  std::vector<AtomId> pre;  // sorted, unique
  std::vector<AtomId> add;
  std::vector<AtomId> del;
};

// Compressed atom -> action adjacency.
struct AtomActionIndex {
  std::vector<std::uint32_t> start;  // size num_atoms + 1
  std::vector<ActionId> actions;

  std::span<const ActionId> operator[](AtomId a) const {
    return {actions.data() + start[a], actions.data() + start[a + 1]};
  }
};

// Grounded planning task. Immutable after ground_task() returns.
class Task {
 public:
  std::shared_ptr<const DomainDef> domain;
  ProblemDef problem;
  AtomIndex atoms;
  std::vector<GroundAction> actions;
  State init;
  std::vector<AtomId> goal;

  std::size_t num_objects() const { return problem.objects.size(); }

  bool is_goal(const State& s) const { return s.contains_all(goal); }

  bool is_applicable(const State& s, ActionId a) const { return s.contains_all(actions[a].pre); }

  // Actions with pre(a) ⊆ s, ascending id.
  std::vector<ActionId> applicable_actions(const State& s) const {
    std::vector<ActionId> out;
    for (ActionId a : relevant_actions(s))
      if (is_applicable(s, a)) out.push_back(a);
    return out;
  }

  State apply(const State& s, ActionId a) const {
    const GroundAction& act = actions[a];
    if (!is_applicable(s, a))
      throw InapplicableAction("action " + action_name(a) + " is not applicable");
    State next = s;
    for (AtomId d : act.del) next.erase(d);
    for (AtomId d : act.add) next.insert(d);
    return next;
  }

  // Every action that can be applicable in s. When s agrees with the initial
  // state on all static atoms this is the statically pruned candidate list.
  const std::vector<ActionId>& relevant_actions(const State& s) const {
    return statics_agree(s) ? candidates_ : all_actions_;
  }
  const AtomActionIndex& pre_index(const State& s) const {
    return statics_agree(s) ? candidate_pre_index_ : full_pre_index_;
  }
  const AtomActionIndex& add_index(const State& s) const {
    return statics_agree(s) ? candidate_add_index_ : full_add_index_;
  }

  bool statics_agree(const State& s) const {
    auto w = s.words();
    for (std::size_t i = 0; i < w.size(); ++i)
      if ((w[i] & static_mask_[i]) != static_init_[i]) return false;
    return true;
  }

  std::string atom_name(AtomId a) const {
    GroundAtom g = atoms.decode(a);
    std::string out = "(" + domain->predicates[g.predicate].name;
    for (int i = 0; i < g.arity; ++i) out += " " + problem.objects[g.args[i]].name;
    return out + ")";
  }

  std::string action_name(ActionId a) const {
    const GroundAction& act = actions[a];
    std::string out = "(" + domain->actions[act.schema].name;
    for (ObjectId o : act.binding) out += " " + problem.objects[o].name;
    return out + ")";
  }

  AtomId atom_id(const GroundAtom& g) const { return atoms.id(g); }

 private:
  friend Task ground_task(std::shared_ptr<const DomainDef>, ProblemDef);

  std::vector<ActionId> all_actions_;
  std::vector<ActionId> candidates_;
  std::vector<std::uint64_t> static_mask_;
  std::vector<std::uint64_t> static_init_;
  AtomActionIndex full_pre_index_, full_add_index_;
  AtomActionIndex candidate_pre_index_, candidate_add_index_;
};

namespace detail {

inline AtomActionIndex build_index(std::size_t num_atoms, const std::vector<GroundAction>& acts,
                                   std::span<const ActionId> subset,
                                   std::vector<AtomId> GroundAction::*field) {
  AtomActionIndex idx;
  idx.start.assign(num_atoms + 1, 0);
  for (ActionId a : subset)
    for (AtomId atom : acts[a].*field) ++idx.start[atom + 1];
  for (std::size_t i = 0; i < num_atoms; ++i) idx.start[i + 1] += idx.start[i];
  idx.actions.resize(idx.start[num_atoms]);
  std::vector<std::uint32_t> fill(idx.start.begin(), idx.start.end() - 1);
  for (ActionId a : subset)
    for (AtomId atom : acts[a].*field) idx.actions[fill[atom]++] = a;
  return idx;
}

inline std::vector<AtomId> bind_atoms(const std::vector<SchemaAtom>& atoms,
                                      const std::vector<ObjectId>& binding,
                                      const AtomIndex& index) {
  std::vector<AtomId> out;
  out.reserve(atoms.size());
  for (const auto& sa : atoms) {
    GroundAtom g(sa.predicate);
    g.arity = static_cast<std::uint8_t>(sa.params.size());
    for (std::size_t i = 0; i < sa.params.size(); ++i) g.args[i] = binding[sa.params[i]];
    out.push_back(index.id(g));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace detail

// Grounds every type-consistent binding of every schema (schemas in
// declaration order, bindings in lexicographic object-id order).
inline Task ground_task(std::shared_ptr<const DomainDef> domain, ProblemDef problem) {
  if (problem.domain_name != domain->name)
    throw DomainMismatch("problem is for domain '" + problem.domain_name + "', not '" +
                         domain->name + "'");
  Task task;
  task.domain = std::move(domain);
  task.problem = std::move(problem);
  const DomainDef& d = *task.domain;
  const ProblemDef& p = task.problem;
  const std::size_t n = p.objects.size();
  task.atoms = AtomIndex(d, n);

  std::vector<TypeId> object_types(n);
  for (std::size_t o = 0; o < n; ++o) {
    auto t = d.type_id(p.objects[o].type);
    if (!t) throw UnknownSymbol("undeclared type '" + p.objects[o].type + "'");
    object_types[o] = *t;
  }

  for (std::uint32_t s = 0; s < d.actions.size(); ++s) {
    const ActionSchema& schema = d.actions[s];
    std::vector<std::vector<ObjectId>> domains(schema.params.size());
    bool empty = false;
    for (std::size_t k = 0; k < schema.params.size(); ++k) {
      TypeId t = *d.type_id(schema.params[k].type);
      for (ObjectId o = 0; o < n; ++o)
        if (d.is_subtype(object_types[o], t)) domains[k].push_back(o);
      empty = empty || domains[k].empty();
    }
    if (empty) continue;
    std::vector<std::size_t> pos(schema.params.size(), 0);
    std::vector<ObjectId> binding(schema.params.size());
    for (;;) {
      for (std::size_t k = 0; k < pos.size(); ++k) binding[k] = domains[k][pos[k]];
      GroundAction act;
      act.schema = s;
      act.binding = binding;
      act.pre = detail::bind_atoms(schema.pre, binding, task.atoms);
      act.add = detail::bind_atoms(schema.add, binding, task.atoms);
      act.del = detail::bind_atoms(schema.del, binding, task.atoms);
      task.actions.push_back(std::move(act));
      bool done = true;
      for (std::size_t k = pos.size(); k-- > 0;) {
        if (++pos[k] < domains[k].size()) {
          done = false;
          break;
        }
        pos[k] = 0;
      }
      if (done) break;
    }
  }

  task.init = State(task.atoms.size());
  for (const auto& g : p.init) task.init.insert(task.atoms.id(g));
  for (const auto& g : p.goal) task.goal.push_back(task.atoms.id(g));
  std::sort(task.goal.begin(), task.goal.end());

  // Static predicates never appear in an effect; their atoms keep the
  // initial truth value in every reachable state.
  std::vector<bool> fluent(d.predicates.size(), false);
  for (const auto& a : d.actions) {
    for (const auto& sa : a.add) fluent[sa.predicate] = true;
    for (const auto& sa : a.del) fluent[sa.predicate] = true;
  }
  State mask(task.atoms.size());
  for (AtomId a = 0; a < task.atoms.size(); ++a)
    if (!fluent[task.atoms.decode(a).predicate]) mask.insert(a);
  auto mw = mask.words();
  auto iw = task.init.words();
  task.static_mask_.assign(mw.begin(), mw.end());
  task.static_init_.resize(mw.size());
  for (std::size_t i = 0; i < mw.size(); ++i) task.static_init_[i] = iw[i] & mw[i];

  task.all_actions_.resize(task.actions.size());
  for (ActionId a = 0; a < task.actions.size(); ++a) {
    task.all_actions_[a] = a;
    bool possible = true;
    for (AtomId atom : task.actions[a].pre)
      if (mask.contains(atom) && !task.init.contains(atom)) possible = false;
    if (possible) task.candidates_.push_back(a);
  }
  const std::size_t na = task.atoms.size();
  task.full_pre_index_ = detail::build_index(na, task.actions, task.all_actions_, &GroundAction::pre);
  task.full_add_index_ = detail::build_index(na, task.actions, task.all_actions_, &GroundAction::add);
  task.candidate_pre_index_ =
      detail::build_index(na, task.actions, task.candidates_, &GroundAction::pre);
  task.candidate_add_index_ =
      detail::build_index(na, task.actions, task.candidates_, &GroundAction::add);
  return task;
}

inline Task ground_task(const DomainDef& domain, ProblemDef problem) {
  return ground_task(std::make_shared<const DomainDef>(domain), std::move(problem));
}

}  // namespace genplan::pddl

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "genplan/errors.hpp"
#include "genplan/pddl/task.hpp"

namespace genplan {

using pddl::DomainDef;
using pddl::PredicateId;

// Predicates split by arity, with (K+2) feature blocks per class:
// K history snapshots (oldest first), the current state, then the goal.
struct FeatureLayout {
  std::vector<PredicateId> p0, p1, p2;
  std::vector<int> slot;  // predicate id -> position within its arity class
  int K = 1;

  std::size_t blocks() const { return static_cast<std::size_t>(K) + 2; }
  std::size_t d_u() const { return blocks() * p0.size(); }
  std::size_t d_v() const { return blocks() * p1.size(); }
  std::size_t d_e() const { return blocks() * p2.size(); }

  const std::vector<PredicateId>& arity_class(int arity) const {
    return arity == 0 ? p0 : arity == 1 ? p1 : p2;
  }
  // Feature index of predicate `slot` in block `block` of an arity class.
  std::size_t index(int arity, std::size_t block, std::size_t s) const {
    return block * arity_class(arity).size() + s;
  }
  std::size_t current_block() const { return static_cast<std::size_t>(K); }
  std::size_t goal_block() const { return static_cast<std::size_t>(K) + 1; }

  bool operator==(const FeatureLayout&) const = default;
};

inline FeatureLayout build_layout(const DomainDef& domain, int K = 1) {
  if (K < 0) throw ArityError("history length must be non-negative");
  FeatureLayout l;
  l.K = K;
  l.slot.assign(domain.predicates.size(), -1);
  for (PredicateId p = 0; p < domain.predicates.size(); ++p) {
    const int arity = domain.predicates[p].arity;
    if (arity < 0 || arity > 2)
      throw ArityError("predicate '" + domain.predicates[p].name + "' has arity " + std::to_string(arity));
    auto& cls = arity == 0 ? l.p0 : arity == 1 ? l.p1 : l.p2;
    l.slot[p] = static_cast<int>(cls.size());
    cls.push_back(p);
  }
  return l;
}

// Features of one state-goal graph. Edge (i, j) with i != j carries the
// binary predicates p(obj_i, obj_j); the diagonal of e is unused.
struct StateGoalGraph {
  std::size_t n = 0;
  std::size_t d_u = 0, d_v = 0, d_e = 0;
  std::vector<float> u;  // [d_u]
  std::vector<float> v;  // [n x d_v]
  std::vector<float> e;  // [n x n x d_e]
  std::vector<pddl::ObjectId> object_order;

  float& node(std::size_t i, std::size_t f) { return v[i * d_v + f]; }
  float node(std::size_t i, std::size_t f) const { return v[i * d_v + f]; }
  float& edge(std::size_t i, std::size_t j, std::size_t f) { return e[(i * n + j) * d_e + f]; }
  float edge(std::size_t i, std::size_t j, std::size_t f) const { return e[(i * n + j) * d_e + f]; }
  std::size_t num_edges() const { return n * (n > 0 ? n - 1 : 0); }
};

// Row index of edge i -> j (i != j) in the off-diagonal edge list, which
// enumerates origins i ascending and, for each, targets j ascending.
inline std::size_t edge_index(std::size_t n, std::size_t i, std::size_t j) {
  return i * (n - 1) + (j < i ? j : j - 1);
}

namespace detail {

inline void fill_block(StateGoalGraph& g, const pddl::Task& task, const FeatureLayout& l,
                       std::span<const pddl::AtomId> atoms, std::size_t block) {
  for (pddl::AtomId id : atoms) {
    const pddl::GroundAtom a = task.atoms.decode(id);
    const auto s = static_cast<std::size_t>(l.slot[a.predicate]);
    switch (a.arity) {
      case 0: g.u[l.index(0, block, s)] = 1.0f; break;
      case 1: g.node(a.args[0], l.index(1, block, s)) = 1.0f; break;
      default:
        if (a.args[0] != a.args[1]) g.edge(a.args[0], a.args[1], l.index(2, block, s)) = 1.0f;
        break;
    }
  }
}

}  // namespace detail

// history holds up to K previous states, oldest first. Missing leading
// snapshots repeat the oldest one available (the current state if none).
inline StateGoalGraph encode(const pddl::Task& task, std::span<const pddl::State> history,
                             const pddl::State& current, const FeatureLayout& layout) {
  if (history.size() > static_cast<std::size_t>(layout.K))
    throw ShapeMismatch("history longer than the layout's K");
  if (layout.slot.size() != task.domain->predicates.size())
    throw LayoutMismatch("layout was built for a different domain");
  StateGoalGraph g;
  g.n = task.num_objects();
  g.d_u = layout.d_u();
  g.d_v = layout.d_v();
  g.d_e = layout.d_e();
  g.u.assign(g.d_u, 0.0f);
  g.v.assign(g.n * g.d_v, 0.0f);
  g.e.assign(g.n * g.n * g.d_e, 0.0f);
  g.object_order.resize(g.n);
  for (std::size_t i = 0; i < g.n; ++i) g.object_order[i] = static_cast<pddl::ObjectId>(i);

  const std::size_t K = static_cast<std::size_t>(layout.K);
  const std::size_t pad = K - history.size();
  for (std::size_t b = 0; b < K; ++b) {
    const pddl::State& s = b < pad ? (history.empty() ? current : history.front()) : history[b - pad];
    detail::fill_block(g, task, layout, s.atoms(), b);
  }
  detail::fill_block(g, task, layout, current.atoms(), layout.current_block());
  detail::fill_block(g, task, layout, task.goal, layout.goal_block());
  return g;
}

}  // namespace genplan

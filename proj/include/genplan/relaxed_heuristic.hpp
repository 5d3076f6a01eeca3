#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <vector>

#include "genplan/errors.hpp"
#include "genplan/pddl/task.hpp"

namespace genplan {

using pddl::ActionId;
using pddl::AtomId;
using pddl::State;
using pddl::Task;

inline constexpr int kUnreached = std::numeric_limits<int>::max();

struct RelaxedPlanResult {
  bool infinite = false;
  std::size_t length = 0;
  std::vector<ActionId> plan;  // ordered by first-appearance layer

  bool finite() const { return !infinite; }
};

// First-appearance layers of the delete-relaxed planning graph from s.
struct RelaxedLayers {
  std::vector<int> atom_layer;    // kUnreached if never reached
  std::vector<int> action_layer;  // indexed by ActionId; kUnreached if never applicable
};

inline RelaxedLayers relaxed_layers(const Task& task, const State& s) {
  const auto& relevant = task.relevant_actions(s);
  const auto& pre_index = task.pre_index(s);
  RelaxedLayers out;
  out.atom_layer.assign(task.atoms.size(), kUnreached);
  out.action_layer.assign(task.actions.size(), kUnreached);

  std::vector<std::uint32_t> missing(task.actions.size(), 0);
  for (ActionId a : relevant) missing[a] = static_cast<std::uint32_t>(task.actions[a].pre.size());

  std::vector<AtomId> frontier = s.atoms();
  for (AtomId a : frontier) out.atom_layer[a] = 0;
  std::vector<ActionId> ready;
  for (ActionId a : relevant)
    if (missing[a] == 0) ready.push_back(a);

  for (int layer = 0;; ++layer) {
    for (AtomId atom : frontier)
      for (ActionId a : pre_index[atom])
        if (--missing[a] == 0) ready.push_back(a);
    if (ready.empty()) break;
    std::vector<AtomId> next;
    for (ActionId a : ready) {
      out.action_layer[a] = layer;
      for (AtomId q : task.actions[a].add)
        if (out.atom_layer[q] == kUnreached) {
          out.atom_layer[q] = layer + 1;
          next.push_back(q);
        }
    }
    ready.clear();
    frontier = std::move(next);
  }
  return out;
}

// FF heuristic: relaxed planning graph to a fixpoint, then backward
// extraction. Each subgoal at layer L is achieved by an action of layer L-1;
// among those the smallest action id wins.
inline RelaxedPlanResult hff(const Task& task, const State& s) {
  RelaxedPlanResult result;
  if (task.is_goal(s)) return result;
  RelaxedLayers layers = relaxed_layers(task, s);
  int top = 0;
  for (AtomId g : task.goal) {
    if (layers.atom_layer[g] == kUnreached) {
      result.infinite = true;
      return result;
    }
    top = std::max(top, layers.atom_layer[g]);
  }
  const auto& add_index = task.add_index(s);
  std::vector<std::vector<AtomId>> goals_at(static_cast<std::size_t>(top) + 1);
  std::vector<char> queued(task.atoms.size(), 0);
  std::vector<char> achieved(task.atoms.size(), 0);
  std::vector<char> selected(task.actions.size(), 0);
  for (AtomId g : task.goal) {
    if (layers.atom_layer[g] > 0 && !queued[g]) {
      queued[g] = 1;
      goals_at[layers.atom_layer[g]].push_back(g);
    }
  }
  std::vector<ActionId> chosen;
  for (int layer = top; layer > 0; --layer) {
    auto& goals = goals_at[layer];
    std::sort(goals.begin(), goals.end());
    for (AtomId g : goals) {
      if (achieved[g]) continue;
      ActionId best = 0;
      bool found = false;
      for (ActionId a : add_index[g]) {
        if (layers.action_layer[a] != layer - 1) continue;
        if (!found || a < best) {
          best = a;
          found = true;
        }
      }
      // An atom first reached at layer L always has an achiever at L-1.
      if (!found) continue;
      if (selected[best]) continue;
      selected[best] = 1;
      chosen.push_back(best);
      for (AtomId q : task.actions[best].add)
        if (layers.atom_layer[q] == layer) achieved[q] = 1;
      for (AtomId p : task.actions[best].pre) {
        int pl = layers.atom_layer[p];
        if (pl > 0 && !queued[p]) {
          queued[p] = 1;
          goals_at[pl].push_back(p);
        }
      }
    }
  }
  std::stable_sort(chosen.begin(), chosen.end(), [&](ActionId a, ActionId b) {
    return layers.action_layer[a] < layers.action_layer[b];
  });
  result.length = chosen.size();
  result.plan = std::move(chosen);
  return result;
}

inline constexpr std::size_t kHorizonFactor = 5;

inline std::size_t horizon(const Task& task, const State& from) {
  RelaxedPlanResult r = hff(task, from);
  if (r.infinite) throw UnsolvableRelaxation("goal is unreachable in the delete relaxation");
  return kHorizonFactor * r.length;
}

inline std::size_t horizon(const Task& task) { return horizon(task, task.init); }

}  // namespace genplan

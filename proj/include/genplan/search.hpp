#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "genplan/action_policy.hpp"
#include "genplan/errors.hpp"
#include "genplan/pddl/task.hpp"
#include "genplan/relaxed_heuristic.hpp"
#include "genplan/rollout.hpp"

namespace genplan::search {

using pddl::ActionId;
using pddl::State;
using pddl::StateHash;
using pddl::Task;

struct Budget {
  double max_seconds = 600;
  std::size_t max_expansions = std::numeric_limits<std::size_t>::max();
};

enum class Status { Solved, BudgetExhausted, Unsolvable };

inline std::string status_name(Status s) {
  switch (s) {
    case Status::Solved: return "solved";
    case Status::BudgetExhausted: return "budget-exhausted";
    default: return "unsolvable";
  }
}

struct SearchResult {
  Status status = Status::BudgetExhausted;
  std::optional<std::vector<ActionId>> plan;
  std::size_t expanded = 0;
  std::size_t generated = 0;
  std::size_t rollout_steps = 0;
  std::size_t peak_open = 0;
  double seconds = 0;

  bool solved() const { return status == Status::Solved; }
};

// Sequential applicability from the initial state and the goal at the end.
inline bool validate_plan(const Task& task, const std::vector<ActionId>& plan) {
  State s = task.init;
  for (ActionId a : plan) {
    if (a >= task.actions.size() || !task.is_applicable(s, a)) return false;
    s = task.apply(s, a);
  }
  return task.is_goal(s);
}

inline constexpr double kValueFloor = 1e-6;

// g(s, a) = pi(a|s) max(V(s), eps) / (1 + H(pi(.|s))); larger is better.
inline double node_score(const PolicyValueOutput& o, std::size_t a) {
  return o.probs.at(a) * std::max(o.value, kValueFloor) / (1.0 + entropy(o));
}

// Max-priority queue that pops equal priorities in insertion order.
template <class Item>
class BestFirstQueue {
 public:
  void push(double priority, Item item) { heap_.push({priority, seq_++, std::move(item)}); }
  Item pop() {
    Item out = heap_.top().item;
    heap_.pop();
    return out;
  }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }

 private:
  struct Entry {
    double priority;
    std::uint64_t seq;
    Item item;
  };
  struct Worse {
    bool operator()(const Entry& a, const Entry& b) const {
      return a.priority < b.priority || (a.priority == b.priority && a.seq > b.seq);
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, Worse> heap_;
  std::uint64_t seq_ = 0;
};

namespace detail {

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_;
};

// A state reached by the search tree, with the edge that produced it.
struct TreeState {
  State state;
  std::size_t parent;  // kRoot for the initial state
  ActionId action = 0;
};

inline constexpr std::size_t kRoot = std::numeric_limits<std::size_t>::max();

inline std::vector<ActionId> path_to(const std::vector<TreeState>& tree, std::size_t i) {
  std::vector<ActionId> out;
  for (; tree[i].parent != kRoot; i = tree[i].parent) out.push_back(tree[i].action);
  return {out.rbegin(), out.rend()};
}

// The last k states on the path ending at tree entry i (excluded), oldest first.
inline std::vector<State> ancestors(const std::vector<TreeState>& tree, std::size_t i, std::size_t k) {
  std::vector<State> out;
  for (std::size_t j = tree[i].parent; j != kRoot && out.size() < k; j = tree[j].parent) out.push_back(tree[j].state);
  return {out.rbegin(), out.rend()};
}

inline SearchResult finish(SearchResult r, const Task& task, std::vector<ActionId> plan, const Timer& timer) {
  if (!validate_plan(task, plan)) throw InapplicableAction("search produced an invalid plan");
  r.status = Status::Solved;
  r.plan = std::move(plan);
  r.seconds = timer.seconds();
  return r;
}

}  // namespace detail

// Greedy best-first search over (state, action) edges scored by node_score,
// with one sampled policy rollout from every expanded successor. A greedy
// rollout from the initial state is tried first and costs no expansion.
template <class T>
SearchResult gbfs_gnn(std::shared_ptr<const Task> task_ptr, const PolicyNetwork<T>& net, const Budget& budget,
                      std::uint64_t seed) {
  using namespace detail;
  const Task& task = *task_ptr;
  Timer timer;
  SearchResult r;
  if (task.is_goal(task.init)) return finish(r, task, {}, timer);
  const auto relaxed = hff(task, task.init);
  if (!relaxed.finite()) {
    r.status = Status::Unsolvable;
    r.seconds = timer.seconds();
    return r;
  }
  const std::size_t K = static_cast<std::size_t>(net.layout().K);
  std::mt19937_64 rng(seed);

  std::vector<TreeState> tree;
  tree.push_back({task.init, kRoot, 0});

  auto rollout = [&](std::size_t entry, RolloutMode mode) -> std::optional<std::vector<ActionId>> {
    const State& s = tree[entry].state;
    const auto h = hff(task, s);
    if (!h.finite()) return std::nullopt;
    EpisodeStart start{task_ptr, s, ancestors(tree, entry, K), kHorizonFactor * h.length, rng()};
    Trajectory tr = std::move(run_episodes(net, {start}, mode)[0]);
    r.rollout_steps += tr.length();
    if (!tr.solved) return std::nullopt;
    std::vector<ActionId> plan = path_to(tree, entry);
    for (ActionId a : tr.plan()) plan.push_back(a);
    return plan;
  };

  if (auto plan = rollout(0, RolloutMode::Greedy)) return finish(r, task, std::move(*plan), timer);
  if (budget.max_expansions == 0) {
    r.seconds = timer.seconds();
    return r;
  }

  struct Edge {
    std::size_t entry;
    ActionId action;
  };
  BestFirstQueue<Edge> open;
  std::unordered_set<State, StateHash> visited{task.init};

  // Scores the actions of a tree state and queues them. Returns a plan when
  // one of the edges leads straight to the goal.
  auto generate = [&](std::size_t entry) -> std::optional<std::vector<ActionId>> {
    const State& s = tree[entry].state;
    std::vector<ActionId> acts = task.applicable_actions(s);
    if (acts.empty()) return std::nullopt;
    std::vector<State> hist = ancestors(tree, entry, K);
    std::vector<const State*> hp;
    for (const auto& h : hist) hp.push_back(&h);
    PolicyValueOutput o = evaluate(net, {Observation{&task, hp, &s, &acts}})[0];
    for (std::size_t i = 0; i < acts.size(); ++i) {
      ++r.generated;
      if (task.is_goal(task.apply(s, acts[i]))) {
        std::vector<ActionId> plan = path_to(tree, entry);
        plan.push_back(acts[i]);
        return plan;
      }
      open.push(node_score(o, i), {entry, acts[i]});
    }
    r.peak_open = std::max(r.peak_open, open.size());
    return std::nullopt;
  };

  if (auto plan = generate(0)) return finish(r, task, std::move(*plan), timer);
  while (!open.empty()) {
    if (r.expanded >= budget.max_expansions || timer.seconds() >= budget.max_seconds) {
      r.status = Status::BudgetExhausted;
      r.seconds = timer.seconds();
      return r;
    }
    const Edge edge = open.pop();
    State succ = task.apply(tree[edge.entry].state, edge.action);
    if (!visited.insert(succ).second) continue;
    ++r.expanded;
    tree.push_back({std::move(succ), edge.entry, edge.action});
    const std::size_t entry = tree.size() - 1;
    if (auto plan = generate(entry)) return finish(r, task, std::move(*plan), timer);
    if (auto plan = rollout(entry, RolloutMode::Sample)) return finish(r, task, std::move(*plan), timer);
  }
  r.status = Status::Unsolvable;
  r.seconds = timer.seconds();
  return r;
}

// Classical greedy best-first search on states ordered by ascending hff
// (FIFO among ties), with a closed set and goal test at generation.
inline SearchResult gbfs_hff(const Task& task, const Budget& budget) {
  using namespace detail;
  Timer timer;
  SearchResult r;
  if (task.is_goal(task.init)) return finish(r, task, {}, timer);
  const auto h0 = hff(task, task.init);
  if (!h0.finite()) {
    r.status = Status::Unsolvable;
    r.seconds = timer.seconds();
    return r;
  }
  BestFirstQueue<std::size_t> open;  // tree indices, priority -hff
  std::vector<TreeState> tree;
  tree.push_back({task.init, kRoot, 0});
  std::unordered_set<State, StateHash> seen{task.init};
  open.push(-static_cast<double>(h0.length), 0);
  r.generated = 1;
  while (!open.empty()) {
    if (r.expanded >= budget.max_expansions || timer.seconds() >= budget.max_seconds) {
      r.status = Status::BudgetExhausted;
      r.seconds = timer.seconds();
      return r;
    }
    const std::size_t index = open.pop();
    ++r.expanded;
    const State s = tree[index].state;
    for (ActionId a : task.applicable_actions(s)) {
      State succ = task.apply(s, a);
      if (seen.count(succ)) continue;
      ++r.generated;
      seen.insert(succ);
      tree.push_back({std::move(succ), index, a});
      const std::size_t idx = tree.size() - 1;
      if (task.is_goal(tree[idx].state)) return finish(r, task, path_to(tree, idx), timer);
      const auto h = hff(task, tree[idx].state);
      if (!h.finite()) continue;
      open.push(-static_cast<double>(h.length), idx);
    }
    r.peak_open = std::max(r.peak_open, open.size());
  }
  r.status = Status::Unsolvable;
  r.seconds = timer.seconds();
  return r;
}

// Follows the greedy policy from the initial state for the usual horizon.
template <class T>
SearchResult greedy_policy(std::shared_ptr<const Task> task, const PolicyNetwork<T>& net) {
  Budget b;
  b.max_expansions = 0;
  return gbfs_gnn(std::move(task), net, b, 0);
}

}  // namespace genplan::search

#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <random>
#include <thread>
#include <vector>

#include "genplan/action_policy.hpp"
#include "genplan/errors.hpp"
#include "genplan/pddl/task.hpp"

namespace genplan {

enum class RolloutMode { Sample, Greedy };

struct Step {
  std::vector<State> history;  // up to K previous states, oldest first
  State state;
  std::vector<ActionId> actions;
  std::size_t choice = 0;
  double log_prob = 0;  // of the chosen action under the acting policy
  double value = 0;
  double reward = 0;

  ActionId action() const { return actions[choice]; }
};

struct Trajectory {
  std::shared_ptr<const Task> task;
  std::vector<Step> steps;
  bool solved = false;
  std::size_t horizon = 0;

  std::size_t length() const { return steps.size(); }
  std::vector<ActionId> plan() const {
    std::vector<ActionId> out;
    for (const auto& s : steps) out.push_back(s.action());
    return out;
  }
};

struct EpisodeStart {
  std::shared_ptr<const Task> task;
  State state;
  std::vector<State> history;  // oldest first; trimmed to the layout's K
  std::size_t horizon = 0;
  std::uint64_t seed = 0;
};

// Edge rows per forward pass such that one [edges x hidden] activation
// stays around 16 MB.
inline std::size_t default_edge_budget(std::size_t hidden) {
  return std::max<std::size_t>(1024, (std::size_t{1} << 22) / std::max<std::size_t>(1, hidden));
}

// Scores observations in consecutive chunks whose graphs hold at most
// `edge_budget` edges in total (a single larger graph gets its own chunk).
template <class T>
std::vector<PolicyValueOutput> evaluate_chunked(const PolicyNetwork<T>& net, const std::vector<Observation>& obs,
                                                std::size_t edge_budget = 0) {
  if (edge_budget == 0) edge_budget = default_edge_budget(net.hidden());
  std::vector<PolicyValueOutput> out;
  out.reserve(obs.size());
  std::size_t begin = 0;
  while (begin < obs.size()) {
    std::size_t end = begin, edges = 0;
    while (end < obs.size()) {
      const std::size_t n = obs[end].task->num_objects();
      const std::size_t e = n * (n > 0 ? n - 1 : 0);
      if (end > begin && edges + e > edge_budget) break;
      edges += e;
      ++end;
    }
    std::vector<Observation> part(obs.begin() + static_cast<long>(begin), obs.begin() + static_cast<long>(end));
    for (auto& r : evaluate(net, part)) out.push_back(std::move(r));
    begin = end;
  }
  return out;
}

namespace detail {

struct LiveEpisode {
  std::size_t index;
  State current;
  std::vector<State> history;
  std::vector<ActionId> actions;
  std::mt19937_64 rng;
};

template <class T>
void run_group(const PolicyNetwork<T>& net, const std::vector<EpisodeStart>& starts,
               const std::vector<std::size_t>& members, RolloutMode mode, std::vector<Trajectory>& out) {
  const std::size_t K = static_cast<std::size_t>(net.layout().K);
  std::vector<LiveEpisode> live;
  for (std::size_t idx : members) {
    const EpisodeStart& s = starts[idx];
    Trajectory& tr = out[idx];
    tr.task = s.task;
    tr.horizon = s.horizon;
    if (s.task->is_goal(s.state)) {
      tr.solved = true;
      continue;
    }
    if (s.horizon == 0) continue;
    LiveEpisode e{idx, s.state, {}, {}, std::mt19937_64(s.seed)};
    const std::size_t keep = std::min(K, s.history.size());
    e.history.assign(s.history.end() - static_cast<long>(keep), s.history.end());
    live.push_back(std::move(e));
  }
  while (!live.empty()) {
    std::vector<Observation> obs;
    std::vector<LiveEpisode> next;
    std::vector<std::size_t> scored;
    for (std::size_t k = 0; k < live.size(); ++k) {
      LiveEpisode& e = live[k];
      e.actions = starts[e.index].task->applicable_actions(e.current);
      if (e.actions.empty()) continue;  // dead end: the episode ends unsolved
      scored.push_back(k);
    }
    obs.reserve(scored.size());
    std::vector<std::vector<const State*>> hist_ptrs(scored.size());
    for (std::size_t q = 0; q < scored.size(); ++q) {
      LiveEpisode& e = live[scored[q]];
      for (const State& h : e.history) hist_ptrs[q].push_back(&h);
      obs.push_back({starts[e.index].task.get(), hist_ptrs[q], &e.current, &e.actions});
    }
    std::vector<PolicyValueOutput> res = evaluate_chunked(net, obs);
    for (std::size_t q = 0; q < scored.size(); ++q) {
      LiveEpisode& e = live[scored[q]];
      const Task& task = *starts[e.index].task;
      Trajectory& tr = out[e.index];
      const PolicyValueOutput& r = res[q];
      const std::size_t choice = mode == RolloutMode::Greedy ? greedy_action(r) : sample_action(r, e.rng);
      Step step;
      step.history = e.history;
      step.state = e.current;
      step.choice = choice;
      step.log_prob = r.log_probs[choice];
      step.value = r.value;
      State succ = task.apply(e.current, e.actions[choice]);
      step.actions = std::move(e.actions);
      const bool goal = task.is_goal(succ);
      step.reward = goal ? 1.0 : 0.0;
      tr.steps.push_back(std::move(step));
      if (goal) {
        tr.solved = true;
        continue;
      }
      if (tr.steps.size() >= tr.horizon) continue;
      if (K > 0) {
        if (e.history.size() == K) e.history.erase(e.history.begin());
        e.history.push_back(std::move(e.current));
      }
      e.current = std::move(succ);
      next.push_back(std::move(e));
    }
    live = std::move(next);
  }
}

}  // namespace detail

// Runs every episode to the goal, a dead end or its horizon. Episodes are
// advanced in lockstep so that each step scores all live states in one
// batch; with several workers each thread advances its own subset.
template <class T>
std::vector<Trajectory> run_episodes(const PolicyNetwork<T>& net, const std::vector<EpisodeStart>& starts,
                                     RolloutMode mode, std::size_t workers = 1) {
  std::vector<Trajectory> out(starts.size());
  workers = std::max<std::size_t>(1, std::min(workers, starts.size()));
  std::vector<std::vector<std::size_t>> groups(workers);
  for (std::size_t i = 0; i < starts.size(); ++i) groups[i % workers].push_back(i);
  if (workers == 1) {
    detail::run_group(net, starts, groups[0], mode, out);
    return out;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w)
    threads.emplace_back([&, w] {
      try {
        detail::run_group(net, starts, groups[w], mode, out);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

template <class T>
Trajectory run_episode(const PolicyNetwork<T>& net, std::shared_ptr<const Task> task, std::size_t horizon,
                       std::mt19937_64& rng, RolloutMode mode) {
  EpisodeStart s{task, task->init, {}, horizon, rng()};
  return std::move(run_episodes(net, {s}, mode)[0]);
}

}  // namespace genplan

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "genplan/action_policy.hpp"
#include "genplan/autodiff/ops.hpp"
#include "genplan/autodiff/params.hpp"
#include "genplan/errors.hpp"
#include "genplan/generators.hpp"
#include "genplan/model_io.hpp"
#include "genplan/relaxed_heuristic.hpp"
#include "genplan/rollout.hpp"

namespace genplan::ppo {

struct TrainConfig {
  std::string domain = "blocksworld";
  generators::SizeDistribution distribution;  // empty: the domain's default
  std::string arch;                           // empty: the domain's default
  int iterations = 1000;
  int episodes = 100;
  int max_update_steps = 20;
  double lr = 1e-4;
  double gamma = 0.99;
  double entropy_bonus = 0.01;
  double clip_ratio = 0.2;
  double kl_cutoff = 0.01;
  double value_weight = 0.5;
  double grad_clip = 0.5;  // global norm; <= 0 disables
  bool normalize_advantages = true;
  std::size_t hidden = 256;
  int history = 1;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  int checkpoint_every = 50;
  std::string out_dir;  // empty: nothing is written
  std::size_t edge_budget = 0;  // edge rows per recorded forward pass; 0 picks one from `hidden`

  void validate() const {
    auto fail = [](const std::string& m) { throw Error("invalid training config: " + m); };
    if (iterations < 0) fail("iterations must be >= 0");
    if (episodes <= 0) fail("episodes must be positive");
    if (max_update_steps <= 0) fail("max_update_steps must be positive");
    if (!(lr > 0)) fail("lr must be positive");
    if (!(gamma > 0 && gamma <= 1)) fail("gamma must lie in (0, 1]");
    if (!(entropy_bonus >= 0)) fail("entropy_bonus must be >= 0");
    if (!(clip_ratio > 0 && clip_ratio < 1)) fail("clip_ratio must lie in (0, 1)");
    if (!(kl_cutoff > 0)) fail("kl_cutoff must be positive");
    if (!(value_weight >= 0)) fail("value_weight must be >= 0");
    if (hidden == 0) fail("hidden must be positive");
    if (history < 0) fail("history must be >= 0");
    if (workers == 0) fail("workers must be positive");
    if (checkpoint_every < 0) fail("checkpoint_every must be >= 0");
  }

  generators::SizeDistribution size_distribution() const {
    return distribution.empty() ? generators::default_training_distribution(domain) : distribution;
  }
  Arch architecture() const { return arch.empty() ? default_arch(domain) : parse_arch(arch); }
};

struct RolloutBatch {
  std::vector<Trajectory> trajectories;
  std::vector<double> returns;     // per step, trajectories concatenated
  std::vector<double> advantages;  // per step, after optional normalization

  std::size_t num_steps() const { return returns.size(); }
};

struct IterationStats {
  int iteration = 0;
  double success_rate = 0;
  double mean_length = 0;
  double policy_loss = 0;
  double value_loss = 0;
  double entropy = 0;
  double approx_kl = 0;
  int update_steps = 0;
  std::vector<double> kl_trace;  // KL measured before each attempted step
  bool numerical_error = false;
  double seconds = 0;
};

// R(t) = sum_{t' >= t} gamma^(t'-t) r_t'.
inline std::vector<double> discounted_returns(const Trajectory& tr, double gamma) {
  std::vector<double> out(tr.steps.size());
  double acc = 0;
  for (std::size_t t = tr.steps.size(); t-- > 0;) {
    acc = tr.steps[t].reward + gamma * acc;
    out[t] = acc;
  }
  return out;
}

inline void normalize(std::vector<double>& x) {
  if (x.empty()) return;
  double mean = 0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(x.size()));
  for (double& v : x) v = sd > 1e-8 ? (v - mean) / sd : v - mean;
}

inline RolloutBatch make_batch(std::vector<Trajectory> trajectories, const TrainConfig& cfg) {
  RolloutBatch b;
  b.trajectories = std::move(trajectories);
  for (const auto& tr : b.trajectories) {
    auto ret = discounted_returns(tr, cfg.gamma);
    for (std::size_t t = 0; t < ret.size(); ++t) {
      b.returns.push_back(ret[t]);
      b.advantages.push_back(ret[t] - tr.steps[t].value);
    }
  }
  if (cfg.normalize_advantages) normalize(b.advantages);
  return b;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Episode `index` (counted over the whole run) draws its instance and its
// actions from streams seeded by seed + index.
inline EpisodeStart training_episode(const generators::SizeDistribution& dist, std::uint64_t seed,
                                     std::uint64_t index) {
  generators::Rng rng(splitmix64(seed + index));
  auto task = generators::sample_training_instance(dist, rng);
  return {task, task->init, {}, horizon(*task), rng()};
}

inline RolloutBatch collect_rollouts(const PolicyNetwork<float>& net, const TrainConfig& cfg,
                                     std::uint64_t first_episode) {
  const auto dist = cfg.size_distribution();
  std::vector<EpisodeStart> starts;
  for (int e = 0; e < cfg.episodes; ++e)
    starts.push_back(training_episode(dist, cfg.seed, first_episode + static_cast<std::uint64_t>(e)));
  return make_batch(run_episodes(net, starts, RolloutMode::Sample, cfg.workers), cfg);
}

// Per-step targets for one chunk of the batch.
template <class T>
struct ChunkTargets {
  ad::Index taken;  // row of the chosen action in the chunk's logp
  std::vector<T> log_prob_old, advantage, ret;
};

template <class T>
struct LossTerms {
  ad::Var<T> total;
  double policy = 0, value = 0, entropy = 0, kl = 0;  // sums over the chunk's steps
};

// Negated clipped surrogate plus weighted value error minus entropy bonus,
// each summed over the chunk and divided by `denom` (the full batch size).
template <class T>
LossTerms<T> ppo_loss(ad::Tape<T>& t, const NetworkOutputs<T>& out, const ChunkTargets<T>& tg,
                      const TrainConfig& cfg, double denom) {
  const std::size_t n = tg.log_prob_old.size();
  auto col = [&](const std::vector<T>& v) { return t.constant(n, 1, v); };
  ad::Var<T> logp = ad::gather_rows(out.logp, tg.taken);
  ad::Var<T> ratio = ad::exp(ad::sub(logp, col(tg.log_prob_old)));
  ad::Var<T> adv = col(tg.advantage);
  const T lo = static_cast<T>(1 - cfg.clip_ratio), hi = static_cast<T>(1 + cfg.clip_ratio);
  ad::Var<T> surr = ad::minimum(ad::mul(ratio, adv), ad::mul(ad::clip(ratio, lo, hi), adv));
  ad::Var<T> neg_entropy = ad::sum(ad::mul(ad::exp(out.logp), out.logp));
  ad::Var<T> sq = ad::sum(ad::square(ad::sub(out.value, col(tg.ret))));
  const T inv = static_cast<T>(1.0 / denom);
  ad::Var<T> total = ad::add(ad::add(ad::scale(ad::sum(surr), -inv), ad::scale(neg_entropy, static_cast<T>(cfg.entropy_bonus) * inv)),
                             ad::scale(sq, static_cast<T>(cfg.value_weight) * inv));
  LossTerms<T> r;
  r.total = total;
  r.policy = -static_cast<double>(ad::sum(surr).item());
  r.value = static_cast<double>(sq.item());
  r.entropy = -static_cast<double>(neg_entropy.item());
  double kl = 0;
  for (std::size_t i = 0; i < n; ++i) kl += static_cast<double>(tg.log_prob_old[i]) - static_cast<double>(logp.item(i));
  r.kl = kl;
  return r;
}

namespace detail {

struct Chunk {
  GraphBatch batch;
  ChunkTargets<float> targets;
};

inline std::vector<Chunk> build_chunks(const RolloutBatch& rb, const FeatureLayout& layout, std::size_t edge_budget) {
  std::vector<Chunk> chunks;
  std::vector<Observation> obs;
  std::vector<std::vector<const State*>> hist;
  std::vector<float> lp, adv, ret;
  std::vector<std::uint32_t> taken;
  std::size_t edges = 0, actions = 0, row = 0;
  auto flush = [&] {
    if (obs.empty()) return;
    for (std::size_t k = 0; k < obs.size(); ++k) obs[k].history = hist[k];
    Chunk c{build_batch(obs, layout), {ad::make_index(std::move(taken)), std::move(lp), std::move(adv), std::move(ret)}};
    chunks.push_back(std::move(c));
    obs.clear();
    hist.clear();
    taken = {};
    lp = {};
    adv = {};
    ret = {};
    edges = actions = 0;
  };
  for (const auto& tr : rb.trajectories) {
    const std::size_t n = tr.task->num_objects();
    const std::size_t e = n * (n > 0 ? n - 1 : 0);
    for (const auto& s : tr.steps) {
      if (!obs.empty() && edges + e > edge_budget) flush();
      std::vector<const State*> h;
      for (const auto& x : s.history) h.push_back(&x);
      hist.push_back(std::move(h));
      obs.push_back({tr.task.get(), {}, &s.state, &s.actions});
      taken.push_back(static_cast<std::uint32_t>(actions + s.choice));
      lp.push_back(static_cast<float>(s.log_prob));
      adv.push_back(static_cast<float>(rb.advantages[row]));
      ret.push_back(static_cast<float>(rb.returns[row]));
      actions += s.actions.size();
      edges += e;
      ++row;
    }
  }
  flush();
  return chunks;
}

}  // namespace detail

// Up to max_update_steps full-batch Adam steps on the PPO objective. Before
// each step the approximate KL(old || new) of the current parameters is
// measured; once it exceeds the cutoff no further step is taken. On a
// non-finite loss or gradient the parameters are restored and NumericalError
// is thrown.
inline IterationStats ppo_update(PolicyNetwork<float>& net, const RolloutBatch& batch, const TrainConfig& cfg) {
  if (batch.num_steps() == 0) throw Error("ppo_update needs at least one step");
  IterationStats st;
  const std::size_t budget = cfg.edge_budget > 0 ? cfg.edge_budget : default_edge_budget(net.hidden());
  auto chunks = detail::build_chunks(batch, net.layout(), budget);
  const double denom = static_cast<double>(batch.num_steps());
  auto& params = net.params();
  const ad::ParamStore<float> snapshot = params;
  ad::AdamConfig adam;
  adam.lr = cfg.lr;
  for (int step = 0; step < cfg.max_update_steps; ++step) {
    params.zero_grad();
    double policy = 0, value = 0, entropy = 0, kl = 0, total = 0;
    for (const auto& c : chunks) {
      ad::Tape<float> tape;
      auto out = net.forward(tape, c.batch);
      auto terms = ppo_loss(tape, out, c.targets, cfg, denom);
      total += static_cast<double>(terms.total.item());
      tape.backward(terms.total);
      policy += terms.policy;
      value += terms.value;
      entropy += terms.entropy;
      kl += terms.kl;
    }
    kl /= denom;
    if (!std::isfinite(total) || !params.grads_finite()) {
      params = snapshot;
      throw NumericalError("non-finite PPO loss or gradient at update step " + std::to_string(step));
    }
    if (step == 0) {
      st.policy_loss = policy / denom;
      st.value_loss = value / denom;
      st.entropy = entropy / denom;
    }
    st.approx_kl = kl;
    st.kl_trace.push_back(kl);
    if (kl > cfg.kl_cutoff) break;
    if (cfg.grad_clip > 0) params.clip_grad_norm(cfg.grad_clip);
    params.adam_step(adam);
    ++st.update_steps;
  }
  params.zero_grad();
  return st;
}

inline std::string stats_header() {
  return "iteration,success_rate,mean_length,policy_loss,value_loss,entropy,approx_kl,update_steps,seconds";
}

inline std::string stats_row(const IterationStats& s) {
  std::ostringstream o;
  o << std::setprecision(8) << s.iteration << ',' << s.success_rate << ',' << s.mean_length << ','
    << s.policy_loss << ',' << s.value_loss << ',' << s.entropy << ',' << s.approx_kl << ','
    << s.update_steps << ',' << s.seconds;
  return o.str();
}

struct TrainResult {
  PolicyNetwork<float> network;
  std::vector<IterationStats> stats;
};

inline PolicyNetwork<float> initial_network(const TrainConfig& cfg) {
  return PolicyNetwork<float>(cfg.architecture(), cfg.hidden,
                              build_layout(*generators::bundled_domain(cfg.domain), cfg.history), cfg.seed);
}

inline std::string checkpoint_name(int iteration) {
  std::ostringstream o;
  o << "checkpoint_" << std::setw(5) << std::setfill('0') << iteration << ".gpn";
  return o.str();
}

// Collect-then-update loop. With out_dir set, writes stats.csv, a checkpoint
// every checkpoint_every iterations and final.gpn.
inline TrainResult train(const TrainConfig& cfg,
                         const std::function<void(const IterationStats&)>& on_iteration = {}) {
  cfg.validate();
  auto domain = generators::bundled_domain(cfg.domain);
  TrainResult res{initial_network(cfg), {}};
  std::ofstream csv;
  const std::filesystem::path dir(cfg.out_dir);
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(dir);
    csv.open(dir / "stats.csv");
    if (!csv) throw Error("cannot write '" + (dir / "stats.csv").string() + "'");
    csv << stats_header() << '\n';
  }
  auto meta = [&](int iterations_done) {
    return ad::Metadata{{"iterations", std::to_string(iterations_done)}, {"seed", std::to_string(cfg.seed)}};
  };
  for (int it = 0; it < cfg.iterations; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t first = static_cast<std::uint64_t>(it) * static_cast<std::uint64_t>(cfg.episodes);
    RolloutBatch batch = collect_rollouts(res.network, cfg, first);
    IterationStats st;
    if (batch.num_steps() > 0) {
      try {
        st = ppo_update(res.network, batch, cfg);
      } catch (const NumericalError&) {
        st = IterationStats{};
        st.numerical_error = true;
      }
    }
    st.iteration = it;
    std::size_t solved = 0, steps = 0;
    for (const auto& tr : batch.trajectories) {
      solved += tr.solved;
      steps += tr.length();
    }
    st.success_rate = static_cast<double>(solved) / static_cast<double>(batch.trajectories.size());
    st.mean_length = static_cast<double>(steps) / static_cast<double>(batch.trajectories.size());
    st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (csv.is_open()) csv << stats_row(st) << '\n' << std::flush;
    if (!cfg.out_dir.empty() && cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0)
      save_network((dir / checkpoint_name(it + 1)).string(), res.network, *domain, meta(it + 1));
    res.stats.push_back(st);
    if (on_iteration) on_iteration(st);
  }
  if (!cfg.out_dir.empty()) save_network((dir / "final.gpn").string(), res.network, *domain, meta(cfg.iterations));
  return res;
}

}  // namespace genplan::ppo

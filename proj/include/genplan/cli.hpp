#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "genplan/config.hpp"
#include "genplan/errors.hpp"
#include "genplan/generators.hpp"
#include "genplan/model_io.hpp"
#include "genplan/pddl/parser.hpp"
#include "genplan/pddl/writer.hpp"
#include "genplan/plan_io.hpp"
#include "genplan/ppo.hpp"
#include "genplan/search.hpp"

namespace genplan::cli {

namespace fs = std::filesystem;

inline constexpr const char* kDefaultOut = "genplan_out";
inline constexpr const char* kRecordHeader = "method,id,solved,status,plan_length,expanded,generated,rollout_steps,seconds";

struct InstanceRecord {
  std::string method;
  std::string id;
  search::SearchResult result;
};

inline std::string record_row(const InstanceRecord& r) {
  std::ostringstream o;
  o << std::setprecision(6) << r.method << ',' << r.id << ',' << (r.result.solved() ? 1 : 0) << ','
    << search::status_name(r.result.status) << ',';
  if (r.result.plan) o << r.result.plan->size();
  o << ',' << r.result.expanded << ',' << r.result.generated << ',' << r.result.rollout_steps << ','
    << r.result.seconds;
  return o.str();
}

struct CurvePoint {
  double budget;
  double success_rate;
};

// Fraction of all records solved within each budget, evaluated at 0 and at
// every distinct cost of a solved record. Cumulative, hence non-decreasing.
inline std::vector<CurvePoint> success_curve(const std::vector<InstanceRecord>& records,
                                             double (*cost)(const search::SearchResult&)) {
  std::vector<double> solved;
  for (const auto& r : records)
    if (r.result.solved()) solved.push_back(cost(r.result));
  std::sort(solved.begin(), solved.end());
  std::vector<CurvePoint> out;
  const double n = records.empty() ? 1.0 : static_cast<double>(records.size());
  if (solved.empty() || solved.front() > 0) out.push_back({0.0, 0.0});
  for (std::size_t i = 0; i < solved.size(); ++i) {
    if (i + 1 < solved.size() && solved[i + 1] == solved[i]) continue;
    out.push_back({solved[i], static_cast<double>(i + 1) / n});
  }
  return out;
}

inline double expansions_cost(const search::SearchResult& r) { return static_cast<double>(r.expanded); }
inline double seconds_cost(const search::SearchResult& r) { return r.seconds; }

struct Instance {
  std::string id;
  std::shared_ptr<const pddl::Task> task;
};

inline std::shared_ptr<const pddl::DomainDef> parse_domain_file(const std::string& path) {
  return std::make_shared<const pddl::DomainDef>(pddl::parse_domain(config::read_file(path)));
}

// The bundled domain named by the config, or the domain file when given,
// which must then share its predicate signature with the bundled one.
inline std::shared_ptr<const pddl::DomainDef> resolve_domain(const config::RunConfig& cfg) {
  if (cfg.domain_file.empty()) return generators::bundled_domain(cfg.train.domain);
  auto d = parse_domain_file(cfg.domain_file);
  std::shared_ptr<const pddl::DomainDef> bundled;
  try {
    bundled = generators::bundled_domain(cfg.train.domain);
  } catch (const UnsupportedDomain&) {
    return d;
  }
  if (predicate_signature(*d) != predicate_signature(*bundled))
    throw DomainMismatch("domain file '" + cfg.domain_file + "' does not match domain '" + cfg.train.domain + "'");
  return d;
}

inline std::shared_ptr<const pddl::Task> load_problem(const std::string& path,
                                                      std::shared_ptr<const pddl::DomainDef> domain) {
  auto problem = pddl::parse_problem(config::read_file(path), *domain);
  return std::make_shared<const pddl::Task>(pddl::ground_task(std::move(domain), std::move(problem)));
}

// Draws `per_spec` instances from every spec of the distribution, skipping
// any whose delete relaxation is unsolvable. Deterministic in the seed.
inline std::vector<pddl::ProblemDef> draw_instances(const generators::SizeDistribution& dist, int per_spec,
                                                    std::uint64_t seed) {
  std::vector<pddl::ProblemDef> out;
  std::uint64_t k = 0;
  for (const auto& w : dist) {
    for (int i = 0; i < per_spec; ++i) {
      for (int attempt = 0;; ++attempt) {
        if (attempt == 100) throw UnsolvableRelaxation("no relaxed-solvable instance after 100 draws");
        auto p = generators::generate(w.spec, ppo::splitmix64(seed + k++));
        auto t = generators::ground(p);
        if (!hff(*t, t->init).finite()) continue;
        out.push_back(std::move(p));
        break;
      }
    }
  }
  return out;
}

inline std::string instance_file_name(std::size_t i) {
  std::ostringstream o;
  o << 'p' << std::setw(4) << std::setfill('0') << i << ".pddl";
  return o.str();
}

// The evaluation set, cached under `dir` and keyed by a manifest of the
// settings that produced it.
inline std::vector<Instance> evaluation_set(const config::RunConfig& cfg, const fs::path& dir) {
  const auto domain = resolve_domain(cfg);
  const auto dist = cfg.evaluation_distribution();
  std::ostringstream m;
  m << "domain=" << domain->name << "\nsizes=" << config::format_sizes(dist) << "\ninstances=" << cfg.instances
    << "\nseed=" << cfg.seed << '\n';
  const std::string manifest = m.str();
  const fs::path manifest_path = dir / "manifest.txt";
  const std::size_t total = dist.size() * static_cast<std::size_t>(cfg.instances);
  bool cached = false;
  if (fs::exists(manifest_path) && config::read_file(manifest_path.string()) == manifest) {
    cached = true;
    for (std::size_t i = 0; i < total; ++i) cached = cached && fs::exists(dir / instance_file_name(i));
  }
  if (!cached) {
    fs::create_directories(dir);
    auto problems = draw_instances(dist, cfg.instances, cfg.seed);
    for (std::size_t i = 0; i < problems.size(); ++i) {
      std::ofstream f(dir / instance_file_name(i));
      f << pddl::to_pddl(problems[i], *domain);
      if (!f) throw Error("cannot write '" + (dir / instance_file_name(i)).string() + "'");
    }
    std::ofstream(manifest_path) << manifest;
  }
  std::vector<Instance> out;
  for (std::size_t i = 0; i < total; ++i) {
    const fs::path p = dir / instance_file_name(i);
    out.push_back({p.stem().string(), load_problem(p.string(), domain)});
  }
  return out;
}

// Runs fn(i) for i in [0, n) on `workers` threads; the first exception wins.
template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w)
    threads.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw Error("cannot write '" + path.string() + "'");
}

inline void write_plan(const fs::path& path, const pddl::Task& task, const std::vector<pddl::ActionId>& plan) {
  if (!search::validate_plan(task, plan)) throw InapplicableAction("refusing to write an invalid plan");
  write_text(path, format_plan(task, plan));
}

inline std::string out_dir(const config::RunConfig& cfg) { return cfg.out.empty() ? kDefaultOut : cfg.out; }

inline int cmd_train(config::RunConfig cfg, std::ostream& out) {
  cfg.out = out_dir(cfg);
  resolve_domain(cfg);
  ppo::TrainConfig t = cfg.training();
  out << ppo::stats_header() << '\n';
  ppo::train(t, [&](const ppo::IterationStats& s) { out << ppo::stats_row(s) << std::endl; });
  out << "wrote " << (fs::path(cfg.out) / "final.gpn").string() << '\n';
  return 0;
}

inline search::SearchResult solve_task(const config::RunConfig& cfg, std::shared_ptr<const pddl::Task> task,
                                       const PolicyNetwork<float>* net, std::uint64_t seed) {
  if (cfg.method == "hff") return search::gbfs_hff(*task, cfg.budget);
  if (cfg.method == "greedy") return search::greedy_policy(task, *net);
  return search::gbfs_gnn(task, *net, cfg.budget, seed);
}

inline int cmd_solve(const config::RunConfig& cfg, std::ostream& out) {
  if (cfg.problem.empty()) throw ConfigError("solve needs a problem file (problem = ...)");
  std::optional<PolicyNetwork<float>> net;
  std::shared_ptr<const pddl::DomainDef> domain;
  if (cfg.method != "hff") {
    if (cfg.checkpoint.empty()) throw ConfigError("solve needs a checkpoint (checkpoint = ...)");
    auto ckpt = ad::load_checkpoint(cfg.checkpoint);
    if (!cfg.domain_file.empty()) {
      domain = parse_domain_file(cfg.domain_file);
    } else {
      auto it = ckpt.meta.find("domain");
      if (it == ckpt.meta.end()) throw LayoutMismatch("checkpoint lacks 'domain'");
      domain = generators::bundled_domain(it->second);
    }
    net.emplace(network_from_checkpoint(std::move(ckpt), *domain));
  } else {
    domain = cfg.domain_file.empty()
                 ? generators::bundled_domain(pddl::problem_domain_name(config::read_file(cfg.problem)))
                 : parse_domain_file(cfg.domain_file);
  }
  auto task = load_problem(cfg.problem, domain);
  auto result = solve_task(cfg, task, net ? &*net : nullptr, cfg.seed);
  if (result.solved()) {
    if (cfg.out.empty()) out << format_plan(*task, *result.plan);
    else write_plan(cfg.out, *task, *result.plan);
  }
  out << kRecordHeader << '\n' << record_row({cfg.method, fs::path(cfg.problem).stem().string(), result}) << '\n';
  return 0;
}

inline void write_curves(const fs::path& path, const std::vector<InstanceRecord>& records,
                         double (*cost)(const search::SearchResult&)) {
  std::ostringstream o;
  o << "method,budget,success_rate\n" << std::setprecision(8);
  for (const std::string method : {"gnn", "hff"}) {
    std::vector<InstanceRecord> mine;
    for (const auto& r : records)
      if (r.method == method) mine.push_back(r);
    for (const auto& p : success_curve(mine, cost)) o << method << ',' << p.budget << ',' << p.success_rate << '\n';
  }
  write_text(path, o.str());
}

inline int cmd_evaluate(const config::RunConfig& cfg, std::ostream& out) {
  if (cfg.checkpoint.empty()) throw ConfigError("evaluate needs a checkpoint (checkpoint = ...)");
  const fs::path dir(out_dir(cfg));
  const auto domain = resolve_domain(cfg);
  const auto net = load_network(cfg.checkpoint, *domain);
  const auto instances = evaluation_set(cfg, cfg.instances_dir.empty() ? dir / "instances" : fs::path(cfg.instances_dir));
  std::vector<InstanceRecord> gnn(instances.size()), base(instances.size());
  parallel_for(instances.size(), cfg.train.workers, [&](std::size_t i) {
    const Instance& inst = instances[i];
    gnn[i] = {"gnn", inst.id, search::gbfs_gnn(inst.task, net, cfg.budget, ppo::splitmix64(cfg.seed + i))};
    base[i] = {"hff", inst.id, search::gbfs_hff(*inst.task, cfg.budget)};
    for (const auto* r : {&gnn[i], &base[i]})
      if (r->result.solved()) write_plan(dir / "plans" / r->method / (inst.id + ".plan"), *inst.task, *r->result.plan);
  });
  std::vector<InstanceRecord> all(gnn);
  all.insert(all.end(), base.begin(), base.end());
  std::ostringstream csv;
  csv << kRecordHeader << '\n';
  for (const auto& r : all) csv << record_row(r) << '\n';
  write_text(dir / "records.csv", csv.str());
  write_curves(dir / "curve_expanded.csv", all, expansions_cost);
  write_curves(dir / "curve_time.csv", all, seconds_cost);
  for (const auto* set : {&gnn, &base}) {
    std::size_t solved = 0;
    for (const auto& r : *set) solved += r.result.solved();
    out << (set == &gnn ? "gnn" : "hff") << ": solved " << solved << '/' << set->size() << '\n';
  }
  return 0;
}

inline int cmd_generate(const config::RunConfig& cfg, std::ostream& out) {
  const auto domain = resolve_domain(cfg);
  const auto dist = cfg.generation_distribution();
  if (cfg.count == 0) return 0;
  const fs::path dir(out_dir(cfg));
  std::vector<double> weights;
  for (const auto& w : dist) weights.push_back(w.weight);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  generators::Rng rng(cfg.seed);
  for (int i = 0; i < cfg.count; ++i) {
    const auto& spec = dist[pick(rng)].spec;
    const auto p = generators::generate(spec, ppo::splitmix64(cfg.seed + static_cast<std::uint64_t>(i)));
    write_text(dir / instance_file_name(static_cast<std::size_t>(i)), pddl::to_pddl(p, *domain));
  }
  write_text(dir / "domain.pddl", pddl::to_pddl(*domain));
  out << "wrote " << cfg.count << " problems to " << dir.string() << '\n';
  return 0;
}

// Entry point shared by the executable and the tests. Exit codes: 0 on
// success, 2 when an input file is missing, 1 for any other error.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Generalized planning with graph neural network policies"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_path, checkpoint, problem;
  std::optional<double> time_limit;
  std::optional<std::size_t> max_expansions, workers;
  std::vector<std::string> overrides;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value configuration file");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--out", out_path, "output directory (plan file for solve)");
    sub->add_option("--time-limit", time_limit, "search time limit per instance in seconds");
    sub->add_option("--max-expansions", max_expansions, "search expansion limit per instance");
    sub->add_option("--workers", workers, "worker threads");
    sub->add_option("--set", overrides, "extra key=value setting")->take_all();
  };
  CLI::App* train = app.add_subcommand("train", "train a policy");
  CLI::App* solve = app.add_subcommand("solve", "solve one problem file");
  CLI::App* evaluate = app.add_subcommand("evaluate", "compare GBFS-GNN with GBFS+hff on a cached instance set");
  CLI::App* generate = app.add_subcommand("generate", "write random problem files");
  for (auto* sub : {train, solve, evaluate, generate}) add_common(sub);
  solve->add_option("--checkpoint", checkpoint, "trained network");
  solve->add_option("--problem", problem, "PDDL problem file");
  evaluate->add_option("--checkpoint", checkpoint, "trained network");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  try {
    config::RunConfig cfg;
    if (!config_path.empty()) cfg = config::load(config_path);
    if (const char* env = std::getenv("GENPLAN_WORKERS"); env && *env) cfg.set("workers", env);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      cfg.set(config::trim(kv.substr(0, eq)), config::trim(kv.substr(eq + 1)));
    }
    if (seed) cfg.seed = *seed;
    if (out_path) cfg.out = *out_path;
    if (time_limit) cfg.budget.max_seconds = *time_limit;
    if (max_expansions) cfg.budget.max_expansions = *max_expansions;
    if (workers) cfg.train.workers = *workers;
    if (checkpoint) cfg.checkpoint = *checkpoint;
    if (problem) cfg.problem = *problem;
    cfg.validate();
    for (const auto* path : {&cfg.domain_file, &cfg.problem, &cfg.checkpoint})
      if (!path->empty() && !fs::exists(*path)) throw MissingFile(*path);
    if (train->parsed()) return cmd_train(cfg, out);
    if (solve->parsed()) return cmd_solve(cfg, out);
    if (evaluate->parsed()) return cmd_evaluate(cfg, out);
    return cmd_generate(cfg, out);
  } catch (const MissingFile& e) {
    err << "genplan: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "genplan: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace genplan::cli

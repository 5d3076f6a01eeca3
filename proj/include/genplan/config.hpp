#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "genplan/errors.hpp"
#include "genplan/generators.hpp"
#include "genplan/ppo.hpp"
#include "genplan/search.hpp"

namespace genplan::config {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string part;
  std::istringstream in(s);
  while (std::getline(in, part, sep)) {
    part = trim(part);
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFile(path);
  std::ostringstream o;
  o << in.rdbuf();
  return o.str();
}

// Pairs of a flat "key = value" file, in order. '#' starts a comment.
inline std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)).empty())
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

// "balls:5-30" or "locations:3-4, cars:2-3"; several specs separated by ';',
// each with an optional "@weight".
inline generators::SizeDistribution parse_sizes(const std::string& domain, const std::string& text) {
  generators::SizeDistribution out;
  for (const auto& item : split(text, ';')) {
    generators::WeightedSpec w{{domain, {}}, 1.0};
    std::string body = item;
    if (auto at = item.find('@'); at != std::string::npos) {
      body = item.substr(0, at);
      try {
        w.weight = std::stod(item.substr(at + 1));
      } catch (const std::exception&) {
        throw ConfigError("bad weight in size spec '" + item + "'");
      }
    }
    for (const auto& kv : split(body, ',')) {
      const auto colon = kv.find(':');
      if (colon == std::string::npos) throw ConfigError("expected name:lo-hi in size spec, got '" + kv + "'");
      const std::string key = trim(kv.substr(0, colon));
      const std::string range = trim(kv.substr(colon + 1));
      const auto dash = range.find('-');
      try {
        const int lo = std::stoi(range.substr(0, dash));
        const int hi = dash == std::string::npos ? lo : std::stoi(range.substr(dash + 1));
        if (lo < 0 || hi < lo) throw ConfigError("empty range in size spec '" + kv + "'");
        w.spec.set(key, lo, hi);
      } catch (const std::logic_error&) {
        throw ConfigError("bad range in size spec '" + kv + "'");
      }
    }
    out.push_back(std::move(w));
  }
  if (out.empty()) throw ConfigError("empty size spec");
  return out;
}

inline std::string format_sizes(const generators::SizeDistribution& dist) {
  std::string out;
  for (const auto& w : dist) {
    if (!out.empty()) out += ';';
    std::string body;
    for (const auto& [k, r] : w.spec.params) {
      if (!body.empty()) body += ',';
      body += k + ':' + std::to_string(r.first);
      if (r.second != r.first) body += '-' + std::to_string(r.second);
    }
    out += body;
    if (w.weight != 1.0) {
      std::ostringstream o;
      o << w.weight;
      out += '@' + o.str();
    }
  }
  return out;
}

// Everything a command can read: training settings, files and the
// evaluation setup.
struct RunConfig {
  ppo::TrainConfig train;
  std::string domain_file;
  std::string problem;
  std::string checkpoint;
  std::string out;
  std::string method = "gnn";  // solve: gnn | greedy | hff
  std::string train_sizes;    // empty: the domain's training default
  std::string eval_sizes;     // empty: the domain's evaluation ranges
  double eval_scale = 1.0;
  int instances = 50;         // evaluation instances per size spec
  int count = 50;             // generate: number of problem files
  std::string sizes;          // generate: empty means the training distribution
  std::string instances_dir;  // evaluate: cache location, default <out>/instances
  search::Budget budget;
  std::uint64_t seed = 0;

  void set(const std::string& key, const std::string& value);

  generators::SizeDistribution training_distribution() const {
    return train_sizes.empty() ? generators::default_training_distribution(train.domain)
                               : parse_sizes(train.domain, train_sizes);
  }
  generators::SizeDistribution evaluation_distribution() const {
    if (!eval_sizes.empty()) return parse_sizes(train.domain, eval_sizes);
    return {{generators::default_evaluation_spec(train.domain, eval_scale), 1.0}};
  }
  generators::SizeDistribution generation_distribution() const {
    return sizes.empty() ? training_distribution() : parse_sizes(train.domain, sizes);
  }

  // Training settings with the run seed and the resolved size distribution.
  ppo::TrainConfig training() const {
    ppo::TrainConfig t = train;
    t.seed = seed;
    t.distribution = training_distribution();
    t.out_dir = out;
    return t;
  }

  void validate() const {
    if (!(budget.max_seconds > 0)) throw ConfigError("time_limit must be positive");
    if (instances < 0) throw ConfigError("instances must be >= 0");
    if (count < 0) throw ConfigError("count must be >= 0");
    if (!(eval_scale > 0)) throw ConfigError("eval_scale must be positive");
    if (method != "gnn" && method != "greedy" && method != "hff")
      throw ConfigError("method must be gnn, greedy or hff");
  }
};

namespace detail {

template <class N>
N parse_number(const std::string& key, const std::string& v) {
  N out{};
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("bad value for " + key + ": '" + v + "'");
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw ConfigError("");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("bad value for " + key + ": '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("bad value for " + key + ": '" + v + "'");
}

}  // namespace detail

inline void RunConfig::set(const std::string& key, const std::string& v) {
  using detail::parse_bool;
  using detail::parse_double;
  using detail::parse_number;
  using Setter = std::function<void(RunConfig&, const std::string&)>;
  static const std::map<std::string, Setter> setters = {
      {"domain", [](RunConfig& c, const std::string& s) { c.train.domain = s; }},
      {"domain_file", [](RunConfig& c, const std::string& s) { c.domain_file = s; }},
      {"problem", [](RunConfig& c, const std::string& s) { c.problem = s; }},
      {"checkpoint", [](RunConfig& c, const std::string& s) { c.checkpoint = s; }},
      {"out", [](RunConfig& c, const std::string& s) { c.out = s; }},
      {"method", [](RunConfig& c, const std::string& s) { c.method = s; }},
      {"arch",
       [](RunConfig& c, const std::string& s) {
         if (s != "gn-gn" && s != "gnat-gn") throw ConfigError("arch must be gn-gn or gnat-gn");
         c.train.arch = s;
       }},
      {"iterations", [](RunConfig& c, const std::string& s) { c.train.iterations = parse_number<int>("iterations", s); }},
      {"episodes", [](RunConfig& c, const std::string& s) { c.train.episodes = parse_number<int>("episodes", s); }},
      {"max_update_steps",
       [](RunConfig& c, const std::string& s) { c.train.max_update_steps = parse_number<int>("max_update_steps", s); }},
      {"lr", [](RunConfig& c, const std::string& s) { c.train.lr = parse_double("lr", s); }},
      {"gamma", [](RunConfig& c, const std::string& s) { c.train.gamma = parse_double("gamma", s); }},
      {"entropy_bonus", [](RunConfig& c, const std::string& s) { c.train.entropy_bonus = parse_double("entropy_bonus", s); }},
      {"clip_ratio", [](RunConfig& c, const std::string& s) { c.train.clip_ratio = parse_double("clip_ratio", s); }},
      {"kl_cutoff", [](RunConfig& c, const std::string& s) { c.train.kl_cutoff = parse_double("kl_cutoff", s); }},
      {"value_weight", [](RunConfig& c, const std::string& s) { c.train.value_weight = parse_double("value_weight", s); }},
      {"grad_clip", [](RunConfig& c, const std::string& s) { c.train.grad_clip = parse_double("grad_clip", s); }},
      {"normalize_advantages",
       [](RunConfig& c, const std::string& s) { c.train.normalize_advantages = parse_bool("normalize_advantages", s); }},
      {"hidden", [](RunConfig& c, const std::string& s) { c.train.hidden = parse_number<std::size_t>("hidden", s); }},
      {"history", [](RunConfig& c, const std::string& s) { c.train.history = parse_number<int>("history", s); }},
      {"workers", [](RunConfig& c, const std::string& s) { c.train.workers = parse_number<std::size_t>("workers", s); }},
      {"checkpoint_every",
       [](RunConfig& c, const std::string& s) { c.train.checkpoint_every = parse_number<int>("checkpoint_every", s); }},
      {"edge_budget",
       [](RunConfig& c, const std::string& s) { c.train.edge_budget = parse_number<std::size_t>("edge_budget", s); }},
      {"seed", [](RunConfig& c, const std::string& s) { c.seed = parse_number<std::uint64_t>("seed", s); }},
      {"train_sizes", [](RunConfig& c, const std::string& s) { c.train_sizes = s; }},
      {"eval_sizes", [](RunConfig& c, const std::string& s) { c.eval_sizes = s; }},
      {"eval_scale", [](RunConfig& c, const std::string& s) { c.eval_scale = parse_double("eval_scale", s); }},
      {"instances", [](RunConfig& c, const std::string& s) { c.instances = parse_number<int>("instances", s); }},
      {"instances_dir", [](RunConfig& c, const std::string& s) { c.instances_dir = s; }},
      {"count", [](RunConfig& c, const std::string& s) { c.count = parse_number<int>("count", s); }},
      {"sizes", [](RunConfig& c, const std::string& s) { c.sizes = s; }},
      {"time_limit", [](RunConfig& c, const std::string& s) { c.budget.max_seconds = parse_double("time_limit", s); }},
      {"max_expansions",
       [](RunConfig& c, const std::string& s) {
         c.budget.max_expansions = parse_number<std::size_t>("max_expansions", s);
       }},
  };
  auto it = setters.find(key);
  if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(*this, v);
}

inline RunConfig load(const std::string& path, RunConfig base = {}) {
  for (const auto& [k, v] : parse_key_values(read_file(path))) base.set(k, v);
  return base;
}

}  // namespace genplan::config

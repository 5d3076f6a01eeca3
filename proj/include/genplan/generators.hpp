#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "genplan/domains.hpp"
#include "genplan/errors.hpp"
#include "genplan/pddl/parser.hpp"
#include "genplan/pddl/task.hpp"
#include "genplan/relaxed_heuristic.hpp"

namespace genplan::generators {

using pddl::DomainDef;
using pddl::GroundAtom;
using pddl::ObjectId;
using pddl::ProblemDef;

struct SizeSpec {
  std::string domain;
  std::map<std::string, std::pair<int, int>> params;

  SizeSpec& set(const std::string& key, int lo, int hi) {
    params[key] = {lo, hi};
    return *this;
  }
  SizeSpec& set(const std::string& key, int value) { return set(key, value, value); }
};

// Parsed bundled domain, looked up by generator key ("gripper") or by the
// PDDL domain name ("gripper-strips").
inline std::shared_ptr<const DomainDef> bundled_domain(const std::string& name) {
  static const std::map<std::string, std::shared_ptr<const DomainDef>> cache = [] {
    std::map<std::string, std::shared_ptr<const DomainDef>> m;
    for (auto n : domains::kNames) {
      auto d = std::make_shared<const DomainDef>(pddl::parse_domain(domains::domain_text(n)));
      m.emplace(std::string(n), d);
      m.emplace(d->name, d);
    }
    return m;
  }();
  auto it = cache.find(name);
  if (it == cache.end()) throw UnsupportedDomain("no generator for domain '" + name + "'");
  return it->second;
}

using Rng = std::mt19937_64;

namespace detail {

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

class Builder {
 public:
  Builder(const DomainDef& d, std::string problem_name) : d_(d) {
    p_.name = std::move(problem_name);
    p_.domain_name = d.name;
  }

  ObjectId object(const std::string& name, const std::string& type = "object") {
    p_.objects.push_back({name, type});
    return static_cast<ObjectId>(p_.objects.size() - 1);
  }

  GroundAtom atom(const std::string& pred, std::initializer_list<ObjectId> args) const {
    auto pid = *d_.predicate_id(pred);
    auto it = args.begin();
    switch (args.size()) {
      case 0: return GroundAtom(pid);
      case 1: return GroundAtom(pid, *it);
      default: return GroundAtom(pid, *it, *(it + 1));
    }
  }

  void init(const std::string& pred, std::initializer_list<ObjectId> args) {
    p_.init.push_back(atom(pred, args));
  }
  void goal(const std::string& pred, std::initializer_list<ObjectId> args) {
    p_.goal.push_back(atom(pred, args));
  }

  ProblemDef finish() {
    pddl::normalize_atoms(p_.init);
    pddl::normalize_atoms(p_.goal);
    return std::move(p_);
  }

  ProblemDef& problem() { return p_; }

 private:
  const DomainDef& d_;
  ProblemDef p_;
};

}  // namespace detail

// A blocksworld configuration: stacks listed bottom to top.
using BlockStacks = std::vector<std::vector<int>>;

// Uniform sample over all arrangements of n labelled blocks into unordered
// towers. The number of arrangements with k towers is the Lah number
// L(n,k) = C(n-1,k-1) n!/k!; given k, a uniform permutation cut by a uniform
// composition into k parts hits every arrangement exactly k! times.
inline BlockStacks sample_block_stacks(int n, Rng& rng) {
  if (n <= 0) return {};
  std::vector<double> log_w(static_cast<std::size_t>(n));
  for (int k = 1; k <= n; ++k)
    log_w[k - 1] = std::lgamma(n) - std::lgamma(k) - std::lgamma(n - k + 1) + std::lgamma(n + 1) -
                   std::lgamma(k + 1);
  double mx = *std::max_element(log_w.begin(), log_w.end());
  std::vector<double> w(log_w.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_w[i] - mx);
  int k = static_cast<int>(std::discrete_distribution<int>(w.begin(), w.end())(rng)) + 1;

  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> gaps(static_cast<std::size_t>(n - 1));
  std::iota(gaps.begin(), gaps.end(), 1);
  std::shuffle(gaps.begin(), gaps.end(), rng);
  std::vector<int> cuts(gaps.begin(), gaps.begin() + (k - 1));
  std::sort(cuts.begin(), cuts.end());
  cuts.push_back(n);
  BlockStacks stacks;
  int begin = 0;
  for (int c : cuts) {
    stacks.emplace_back(perm.begin() + begin, perm.begin() + c);
    begin = c;
  }
  return stacks;
}

// Canonical form for comparing arrangements.
inline BlockStacks canonical(BlockStacks s) {
  std::sort(s.begin(), s.end());
  return s;
}

namespace detail {

inline int param(const SizeSpec& spec, const std::string& key, Rng& rng) {
  auto it = spec.params.find(key);
  if (it == spec.params.end())
    throw UnsupportedDomain("size spec for " + spec.domain + " lacks parameter '" + key + "'");
  auto [lo, hi] = it->second;
  if (lo > hi) throw UnsupportedDomain("size parameter '" + key + "' has min > max");
  return uniform_int(rng, lo, hi);
}

inline ProblemDef gen_blocksworld(const SizeSpec& spec, Rng& rng, const std::string& name) {
  const int n = param(spec, "blocks", rng);
  Builder b(*bundled_domain("blocksworld"), name);
  std::vector<ObjectId> blocks;
  for (int i = 0; i < n; ++i) blocks.push_back(b.object("b" + std::to_string(i + 1), "block"));
  BlockStacks init = sample_block_stacks(n, rng);
  for (const auto& stack : init) {
    b.init("ontable", {blocks[stack.front()]});
    for (std::size_t i = 1; i < stack.size(); ++i)
      b.init("on", {blocks[stack[i]], blocks[stack[i - 1]]});
    b.init("clear", {blocks[stack.back()]});
  }
  b.init("handempty", {});
  // Goals list only on(x, y); redraw until the goal is not already satisfied.
  for (int attempt = 0;; ++attempt) {
    BlockStacks goal = sample_block_stacks(n, rng);
    std::vector<GroundAtom> atoms;
    for (const auto& stack : goal)
      for (std::size_t i = 1; i < stack.size(); ++i)
        atoms.push_back(b.atom("on", {blocks[stack[i]], blocks[stack[i - 1]]}));
    pddl::normalize_atoms(atoms);
    auto& init_atoms = b.problem().init;
    std::vector<GroundAtom> sorted_init = init_atoms;
    pddl::normalize_atoms(sorted_init);
    bool satisfied = std::includes(sorted_init.begin(), sorted_init.end(), atoms.begin(), atoms.end());
    if (n < 2 || !satisfied || attempt > 1000) {
      b.problem().goal = std::move(atoms);
      break;
    }
  }
  return b.finish();
}

inline ProblemDef gen_gripper(const SizeSpec& spec, Rng& rng, const std::string& name) {
  const int n = param(spec, "balls", rng);
  Builder b(*bundled_domain("gripper"), name);
  ObjectId rooma = b.object("rooma"), roomb = b.object("roomb");
  ObjectId left = b.object("left"), right = b.object("right");
  b.init("room", {rooma});
  b.init("room", {roomb});
  b.init("gripper", {left});
  b.init("gripper", {right});
  b.init("at-robby", {rooma});
  b.init("free", {left});
  b.init("free", {right});
  for (int i = 0; i < n; ++i) {
    ObjectId ball = b.object("ball" + std::to_string(i + 1));
    b.init("ball", {ball});
    b.init("at", {ball, rooma});
    b.goal("at", {ball, roomb});
  }
  return b.finish();
}

inline ProblemDef gen_ferry(const SizeSpec& spec, Rng& rng, const std::string& name) {
  const int num_locations = param(spec, "locations", rng);
  const int num_cars = param(spec, "cars", rng);
  if (num_locations < 1) throw UnsupportedDomain("ferry needs at least one location");
  Builder b(*bundled_domain("ferry"), name);
  std::vector<ObjectId> locs, cars;
  for (int i = 0; i < num_locations; ++i) locs.push_back(b.object("l" + std::to_string(i + 1)));
  for (int i = 0; i < num_cars; ++i) cars.push_back(b.object("c" + std::to_string(i + 1)));
  for (ObjectId l : locs) b.init("place", {l});
  for (ObjectId l1 : locs)
    for (ObjectId l2 : locs)
      if (l1 != l2) b.init("not-eq", {l1, l2});
  b.init("empty-ferry", {});
  b.init("at-ferry", {locs[uniform_int(rng, 0, num_locations - 1)]});
  for (ObjectId c : cars) {
    b.init("car", {c});
    int from = uniform_int(rng, 0, num_locations - 1);
    int to = from;
    if (num_locations > 1) {
      to = uniform_int(rng, 0, num_locations - 2);
      if (to >= from) ++to;
    }
    b.init("at", {c, locs[from]});
    b.goal("at", {c, locs[to]});
  }
  return b.finish();
}

inline ProblemDef gen_satellite(const SizeSpec& spec, Rng& rng, const std::string& name) {
  const int num_sats = param(spec, "satellites", rng);
  const int num_modes = param(spec, "modes", rng);
  const int num_targets = param(spec, "targets", rng);
  if (num_sats < 1 || num_modes < 1 || num_targets < 1)
    throw UnsupportedDomain("satellite needs satellites, modes and targets >= 1");
  Builder b(*bundled_domain("satellite"), name);
  std::vector<ObjectId> sats, modes, dirs;
  std::vector<std::pair<ObjectId, ObjectId>> instruments;  // (instrument, satellite)
  for (int i = 0; i < num_sats; ++i) sats.push_back(b.object("satellite" + std::to_string(i), "satellite"));
  for (int s = 0; s < num_sats; ++s) {
    const int count = param(spec, "instruments", rng);
    for (int k = 0; k < std::max(count, 1); ++k)
      instruments.emplace_back(
          b.object("instrument" + std::to_string(instruments.size()), "instrument"), sats[s]);
  }
  for (int i = 0; i < num_modes; ++i) modes.push_back(b.object("mode" + std::to_string(i), "mode"));
  for (int i = 0; i < num_targets; ++i)
    dirs.push_back(b.object("direction" + std::to_string(i), "direction"));

  std::vector<char> supported(modes.size(), 0);
  for (auto [inst, sat] : instruments) {
    b.init("on_board", {inst, sat});
    b.init("calibration_target", {inst, dirs[uniform_int(rng, 0, num_targets - 1)]});
    bool any = false;
    for (std::size_t m = 0; m < modes.size(); ++m)
      if (std::bernoulli_distribution(0.5)(rng)) {
        b.init("supports", {inst, modes[m]});
        supported[m] = any = true;
      }
    if (!any) {
      int m = uniform_int(rng, 0, num_modes - 1);
      b.init("supports", {inst, modes[m]});
      supported[m] = 1;
    }
  }
  std::vector<ObjectId> usable;
  for (std::size_t m = 0; m < modes.size(); ++m)
    if (supported[m]) usable.push_back(modes[m]);
  for (ObjectId s : sats) {
    b.init("power_avail", {s});
    b.init("pointing", {s, dirs[uniform_int(rng, 0, num_targets - 1)]});
  }
  for (ObjectId d : dirs)
    b.goal("have_image", {d, usable[uniform_int(rng, 0, static_cast<int>(usable.size()) - 1)]});
  for (ObjectId s : sats)
    if (std::bernoulli_distribution(0.5)(rng))
      b.goal("pointing", {s, dirs[uniform_int(rng, 0, num_targets - 1)]});
  return b.finish();
}

inline ProblemDef gen_logistics(const SizeSpec& spec, Rng& rng, const std::string& name) {
  const int num_planes = param(spec, "airplanes", rng);
  const int num_cities = param(spec, "cities", rng);
  const int per_city = param(spec, "cityLocations", rng);
  const int num_packages = param(spec, "packages", rng);
  if (num_cities < 1 || per_city < 1)
    throw UnsupportedDomain("logistics needs cities and cityLocations >= 1");
  Builder b(*bundled_domain("logistics"), name);
  std::vector<ObjectId> cities, airports, places, trucks, planes, packages;
  std::vector<std::size_t> place_city;
  for (int c = 0; c < num_cities; ++c) cities.push_back(b.object("city" + std::to_string(c + 1), "city"));
  for (int c = 0; c < num_cities; ++c) {
    for (int l = 0; l < per_city; ++l) {
      const std::string suffix = std::to_string(c + 1) + "-" + std::to_string(l + 1);
      ObjectId loc = l == 0 ? b.object("apt" + suffix, "airport") : b.object("pos" + suffix, "location");
      if (l == 0) airports.push_back(loc);
      places.push_back(loc);
      place_city.push_back(static_cast<std::size_t>(c));
      b.init("in-city", {loc, cities[c]});
    }
  }
  for (int c = 0; c < num_cities; ++c) {
    ObjectId t = b.object("truck" + std::to_string(c + 1), "truck");
    trucks.push_back(t);
    b.init("at", {t, places[static_cast<std::size_t>(c * per_city + uniform_int(rng, 0, per_city - 1))]});
  }
  for (int a = 0; a < num_planes; ++a) {
    ObjectId p = b.object("plane" + std::to_string(a + 1), "airplane");
    planes.push_back(p);
    b.init("at", {p, airports[uniform_int(rng, 0, num_cities - 1)]});
  }
  const int num_places = static_cast<int>(places.size());
  for (int k = 0; k < num_packages; ++k) {
    ObjectId pkg = b.object("package" + std::to_string(k + 1), "package");
    int from = uniform_int(rng, 0, num_places - 1);
    int to = from;
    if (num_places > 1) {
      to = uniform_int(rng, 0, num_places - 2);
      if (to >= from) ++to;
    }
    b.init("at", {pkg, places[from]});
    b.goal("at", {pkg, places[to]});
  }
  return b.finish();
}

}  // namespace detail

// Deterministic in (spec, seed).
inline ProblemDef generate(const SizeSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  const std::string name = spec.domain + "-" + std::to_string(seed);
  if (spec.domain == "blocksworld") return detail::gen_blocksworld(spec, rng, name);
  if (spec.domain == "gripper") return detail::gen_gripper(spec, rng, name);
  if (spec.domain == "ferry") return detail::gen_ferry(spec, rng, name);
  if (spec.domain == "satellite") return detail::gen_satellite(spec, rng, name);
  if (spec.domain == "logistics") return detail::gen_logistics(spec, rng, name);
  throw UnsupportedDomain("no generator for domain '" + spec.domain + "'");
}

struct WeightedSpec {
  SizeSpec spec;
  double weight = 1.0;
};
using SizeDistribution = std::vector<WeightedSpec>;

inline std::shared_ptr<const pddl::Task> ground(const ProblemDef& problem) {
  return std::make_shared<const pddl::Task>(
      pddl::ground_task(bundled_domain(problem.domain_name), problem));
}

// Draws a size by weight, generates and grounds it; redraws instances whose
// delete relaxation is unsolvable.
inline std::shared_ptr<const pddl::Task> sample_training_instance(const SizeDistribution& dist,
                                                                  Rng& rng) {
  if (dist.empty()) throw UnsupportedDomain("empty size distribution");
  std::vector<double> weights;
  for (const auto& w : dist) {
    if (!(w.weight > 0)) throw UnsupportedDomain("size distribution weights must be positive");
    weights.push_back(w.weight);
  }
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  for (int attempt = 0; attempt < 100; ++attempt) {
    const SizeSpec& spec = dist[pick(rng)].spec;
    auto task = ground(generate(spec, rng()));
    if (hff(*task, task->init).finite()) return task;
  }
  throw UnsolvableRelaxation("no relaxed-solvable instance after 100 draws");
}

// Training distributions from the published experimental setup.
inline SizeDistribution default_training_distribution(const std::string& domain) {
  SizeSpec s{domain, {}};
  if (domain == "blocksworld") s.set("blocks", 4);
  else if (domain == "gripper") s.set("balls", 3);
  else if (domain == "ferry") s.set("locations", 3, 4).set("cars", 2, 3);
  else if (domain == "satellite")
    s.set("satellites", 1, 3).set("instruments", 1, 3).set("modes", 1, 3).set("targets", 2, 3);
  else if (domain == "logistics")
    s.set("airplanes", 2, 3).set("cities", 2, 3).set("cityLocations", 2, 3).set("packages", 1, 2);
  else throw UnsupportedDomain("no generator for domain '" + domain + "'");
  return {{s, 1.0}};
}

// Evaluation ranges, with every upper bound multiplied by `scale` (>= lower bound).
inline SizeSpec default_evaluation_spec(const std::string& domain, double scale = 1.0) {
  auto sc = [scale](int lo, int hi) {
    int h = std::max(lo, static_cast<int>(std::lround(hi * scale)));
    return std::pair<int, int>{lo, h};
  };
  SizeSpec s{domain, {}};
  auto put = [&](const std::string& k, int lo, int hi) { s.params[k] = sc(lo, hi); };
  if (domain == "blocksworld") put("blocks", 5, 100);
  else if (domain == "gripper") put("balls", 5, 200);
  else if (domain == "ferry") { put("locations", 4, 40); put("cars", 2, 120); }
  else if (domain == "satellite") {
    put("satellites", 1, 14); put("instruments", 2, 11); put("modes", 1, 6); put("targets", 2, 42);
  } else if (domain == "logistics") {
    put("airplanes", 4, 12); put("cities", 4, 15); put("cityLocations", 1, 6); put("packages", 8, 40);
  } else throw UnsupportedDomain("no generator for domain '" + domain + "'");
  return s;
}

}  // namespace genplan::generators

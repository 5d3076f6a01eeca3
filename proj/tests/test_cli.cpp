#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "genplan/cli.hpp"

using namespace genplan;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run genplan_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "genplan");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("genplan_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) { return config::read_file(p.string()); }

std::size_t count_files(const fs::path& dir, const std::string& ext) {
  std::size_t n = 0;
  if (!fs::exists(dir)) return 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ext;
  return n;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);)
    if (!l.empty()) out.push_back(l);
  return out;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

const char* kTinyTrain =
    "domain = blocksworld\n"
    "train_sizes = blocks:2-3\n"
    "hidden = 8\n"
    "episodes = 4\n"
    "max_update_steps = 2\n"
    "lr = 0.001\n";

}  // namespace

TEST(Config, KeyValueFile) {
  auto kv = config::parse_key_values("# comment\n  lr = 0.5  # trailing\n\nsizes = balls:1-3\n");
  ASSERT_EQ(kv.size(), 2u);
  EXPECT_EQ(kv[0], (std::pair<std::string, std::string>{"lr", "0.5"}));
  EXPECT_EQ(kv[1].second, "balls:1-3");
  EXPECT_THROW(config::parse_key_values("no equals sign"), ConfigError);
  EXPECT_THROW(config::parse_key_values(" = 3"), ConfigError);
}

TEST(Config, SettersAndValidation) {
  config::RunConfig c;
  c.set("lr", "0.002");
  c.set("hidden", "64");
  c.set("normalize_advantages", "false");
  c.set("max_expansions", "0");
  c.set("arch", "gnat-gn");
  EXPECT_DOUBLE_EQ(c.train.lr, 0.002);
  EXPECT_EQ(c.train.hidden, 64u);
  EXPECT_FALSE(c.train.normalize_advantages);
  EXPECT_EQ(c.budget.max_expansions, 0u);
  EXPECT_EQ(c.train.architecture(), Arch::GnatGn);
  EXPECT_THROW(c.set("bogus", "1"), ConfigError);
  EXPECT_THROW(c.set("hidden", "64x"), ConfigError);
  EXPECT_THROW(c.set("lr", "fast"), ConfigError);
  EXPECT_THROW(c.set("arch", "mlp"), ConfigError);
  c.set("time_limit", "0");
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, Defaults) {
  config::RunConfig c;
  EXPECT_DOUBLE_EQ(c.budget.max_seconds, 600.0);
  EXPECT_EQ(c.instances, 50);
  EXPECT_EQ(c.train.iterations, 1000);
  EXPECT_EQ(c.train.hidden, 256u);
}

TEST(Config, SizeSpecs) {
  auto d = config::parse_sizes("ferry", "locations:3-4, cars:2; locations:5@2.5");
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[0].spec.domain, "ferry");
  EXPECT_EQ(d[0].spec.params.at("locations"), (std::pair<int, int>{3, 4}));
  EXPECT_EQ(d[0].spec.params.at("cars"), (std::pair<int, int>{2, 2}));
  EXPECT_DOUBLE_EQ(d[1].weight, 2.5);
  EXPECT_EQ(config::format_sizes(d), "cars:2,locations:3-4;locations:5@2.5");
  EXPECT_EQ(config::format_sizes(config::parse_sizes("ferry", config::format_sizes(d))), config::format_sizes(d));
  EXPECT_THROW(config::parse_sizes("gripper", "balls"), ConfigError);
  EXPECT_THROW(config::parse_sizes("gripper", "balls:5-2"), ConfigError);
  EXPECT_THROW(config::parse_sizes("gripper", "balls:x"), ConfigError);
  EXPECT_THROW(config::parse_sizes("gripper", ""), ConfigError);
}

TEST(Curves, CumulativeAndMonotone) {
  auto rec = [](bool solved, std::size_t expanded) {
    search::SearchResult r;
    r.status = solved ? search::Status::Solved : search::Status::BudgetExhausted;
    r.expanded = expanded;
    return cli::InstanceRecord{"gnn", "x", r};
  };
  std::vector<cli::InstanceRecord> rs{rec(true, 0), rec(true, 0), rec(true, 7), rec(false, 99), rec(true, 3)};
  auto c = cli::success_curve(rs, cli::expansions_cost);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_DOUBLE_EQ(c[0].budget, 0);
  EXPECT_DOUBLE_EQ(c[0].success_rate, 0.4);
  EXPECT_DOUBLE_EQ(c[1].budget, 3);
  EXPECT_DOUBLE_EQ(c[1].success_rate, 0.6);
  EXPECT_DOUBLE_EQ(c[2].budget, 7);
  EXPECT_DOUBLE_EQ(c[2].success_rate, 0.8);
  auto none = cli::success_curve({rec(false, 4)}, cli::expansions_cost);
  ASSERT_EQ(none.size(), 1u);
  EXPECT_DOUBLE_EQ(none[0].success_rate, 0);
}

TEST(PlanIo, RoundTrip) {
  auto t = generators::ground(generators::generate({"gripper", {{"balls", {2, 2}}}}, 3));
  auto r = search::gbfs_hff(*t, {});
  ASSERT_TRUE(r.solved());
  const std::string text = format_plan(*t, *r.plan);
  EXPECT_EQ(parse_plan(*t, text), *r.plan);
  std::string shouty = text;
  for (auto& ch : shouty) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  EXPECT_EQ(parse_plan(*t, "; header\n" + shouty), *r.plan);
  pddl::ActionId move = 0;
  while (t->action_name(move) != "(move rooma roomb)") ++move;
  EXPECT_EQ(parse_plan(*t, "(  move   rooma roomb )\n"), (std::vector<pddl::ActionId>{move}));
  EXPECT_THROW(parse_plan(*t, "(fly rooma roomb)"), UnknownSymbol);
}

TEST(Cli, UnknownCommandFails) {
  EXPECT_NE(genplan_cli({"frobnicate"}).code, 0);
  EXPECT_NE(genplan_cli({}).code, 0);
}

TEST(Cli, MissingDomainFileExitsTwo) {
  auto r = genplan_cli({"train", "--set", "domain_file=/nonexistent/domain.pddl", "--set", "iterations=1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/nonexistent/domain.pddl"), std::string::npos);
  auto c = genplan_cli({"train", "--config", "/nonexistent/run.cfg"});
  EXPECT_EQ(c.code, 2);
  EXPECT_NE(c.err.find("/nonexistent/run.cfg"), std::string::npos);
}

TEST(Cli, ConfigErrorsExitNonzero) {
  auto dir = scratch("badcfg");
  write(dir / "run.cfg", "lr = quick\n");
  auto r = genplan_cli({"train", "--config", (dir / "run.cfg").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("lr"), std::string::npos);
  EXPECT_EQ(genplan_cli({"train", "--set", "nonsense"}).code, 1);
}

TEST(Cli, WorkersFromEnvironment) {
  setenv("GENPLAN_WORKERS", "many", 1);
  auto r = genplan_cli({"generate", "--set", "count=0"});
  unsetenv("GENPLAN_WORKERS");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("workers"), std::string::npos);
}

TEST(Cli, GenerateZeroWritesNothing) {
  auto dir = scratch("gen0");
  auto r = genplan_cli({"generate", "--out", (dir / "set").string(), "--set", "count=0"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_FALSE(fs::exists(dir / "set"));
}

TEST(Cli, GenerateParseableAndDeterministic) {
  auto dir = scratch("gen5");
  for (const char* sub : {"a", "b"}) {
    auto r = genplan_cli({"generate", "--out", (dir / sub).string(), "--seed", "11", "--set", "domain=gripper",
                          "--set", "sizes=balls:3", "--set", "count=5"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  EXPECT_EQ(count_files(dir / "a", ".pddl"), 6u);
  auto domain = cli::parse_domain_file((dir / "a" / "domain.pddl").string());
  for (std::size_t i = 0; i < 5; ++i) {
    const auto name = cli::instance_file_name(i);
    EXPECT_EQ(slurp(dir / "a" / name), slurp(dir / "b" / name));
    auto task = cli::load_problem((dir / "a" / name).string(), domain);
    EXPECT_EQ(task->num_objects(), 7u);
  }
  auto other = genplan_cli({"generate", "--out", (dir / "c").string(), "--seed", "12", "--set", "domain=gripper",
                            "--set", "sizes=balls:3", "--set", "count=5"});
  ASSERT_EQ(other.code, 0);
  bool differs = false;
  for (std::size_t i = 0; i < 5; ++i)
    differs = differs || slurp(dir / "a" / cli::instance_file_name(i)) != slurp(dir / "c" / cli::instance_file_name(i));
  EXPECT_TRUE(differs);
}

TEST(Cli, HffSolveTakesDomainFromProblem) {
  auto dir = scratch("hff");
  ASSERT_EQ(genplan_cli({"generate", "--out", dir.string(), "--seed", "3", "--set", "domain=ferry", "--set",
                         "sizes=locations:3,cars:2", "--set", "count=1"})
                .code,
            0);
  const auto problem = dir / cli::instance_file_name(0);
  auto r = genplan_cli({"solve", "--problem", problem.string(), "--set", "method=hff"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto task = cli::load_problem(problem.string(), cli::parse_domain_file((dir / "domain.pddl").string()));
  const auto body = r.out.substr(0, r.out.find(cli::kRecordHeader));
  EXPECT_TRUE(search::validate_plan(*task, parse_plan(*task, body)));
}

TEST(Cli, TrainSmokeRunAndDeterminism) {
  auto dir = scratch("train");
  write(dir / "run.cfg", kTinyTrain);
  for (const char* sub : {"a", "b"}) {
    auto r = genplan_cli({"train", "--config", (dir / "run.cfg").string(), "--seed", "4", "--workers", "1",
                          "--out", (dir / sub).string(), "--set", "iterations=1"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  auto stats = lines(slurp(dir / "a" / "stats.csv"));
  ASSERT_EQ(stats.size(), 2u);
  EXPECT_EQ(stats[0], ppo::stats_header());
  EXPECT_EQ(slurp(dir / "a" / "final.gpn"), slurp(dir / "b" / "final.gpn"));
}

class SolveTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = scratch("solve");
    write(dir_ / "run.cfg", std::string(kTinyTrain) + "iterations = 1\n");
    auto r = genplan_cli({"train", "--config", (dir_ / "run.cfg").string(), "--out", (dir_ / "model").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    auto g = genplan_cli({"generate", "--out", (dir_ / "problems").string(), "--set", "sizes=blocks:3", "--set",
                          "count=3", "--seed", "2"});
    ASSERT_EQ(g.code, 0) << g.err;
  }
  static std::string checkpoint() { return (dir_ / "model" / "final.gpn").string(); }
  static std::string problem(std::size_t i) { return (dir_ / "problems" / cli::instance_file_name(i)).string(); }
  static fs::path dir_;
};
fs::path SolveTest::dir_;

TEST_F(SolveTest, WritesValidPlans) {
  auto domain = generators::bundled_domain("blocksworld");
  for (const std::string method : {"gnn", "greedy", "hff"}) {
    for (std::size_t i = 0; i < 3; ++i) {
      const fs::path plan = dir_ / ("plan_" + method + std::to_string(i));
      fs::remove(plan);
      auto r = genplan_cli({"solve", "--checkpoint", checkpoint(), "--problem", problem(i), "--out", plan.string(),
                            "--set", "method=" + method, "--max-expansions", "2000"});
      ASSERT_EQ(r.code, 0) << r.err;
      auto rec = lines(r.out);
      ASSERT_EQ(rec.size(), 2u);
      EXPECT_EQ(rec[0], cli::kRecordHeader);
      const bool solved = rec[1].find(method + ",p000" + std::to_string(i) + ",1,solved,") == 0;
      EXPECT_EQ(solved, fs::exists(plan)) << rec[1];
      if (method != "greedy") {
        EXPECT_TRUE(solved) << rec[1];
      }
      if (solved) {
        auto task = cli::load_problem(problem(i), domain);
        EXPECT_TRUE(search::validate_plan(*task, parse_plan(*task, slurp(plan))));
      }
    }
  }
}

TEST_F(SolveTest, GoalSatisfiedGivesEmptyPlan) {
  const std::string text =
      "(define (problem done) (:domain blocks)\n"
      "  (:objects b1 b2 - block)\n"
      "  (:init (ontable b1) (on b2 b1) (clear b2) (handempty))\n"
      "  (:goal (and (on b2 b1))))\n";
  write(dir_ / "done.pddl", text);
  auto r = genplan_cli({"solve", "--checkpoint", checkpoint(), "--problem", (dir_ / "done.pddl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  auto out = lines(r.out);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0], "; cost = 0 (unit cost)");
  EXPECT_EQ(out[2].rfind("gnn,done,1,solved,0,0,", 0), 0u) << out[2];
}

TEST_F(SolveTest, BudgetExhaustedStillExitsZero) {
  auto r = genplan_cli({"solve", "--checkpoint", checkpoint(), "--problem", problem(0), "--set", "method=hff",
                        "--max-expansions", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto out = lines(r.out);
  EXPECT_NE(out.back().find(",0,budget-exhausted,,"), std::string::npos) << out.back();
}

TEST_F(SolveTest, CorruptCheckpointIsRejected) {
  std::string bytes = slurp(checkpoint());
  bytes[0] ^= 0x5a;
  write(dir_ / "corrupt.gpn", bytes);
  auto r = genplan_cli({"solve", "--checkpoint", (dir_ / "corrupt.gpn").string(), "--problem", problem(0)});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("checkpoint"), std::string::npos);
}

TEST_F(SolveTest, CheckpointForAnotherDomainIsRejected) {
  auto g = genplan_cli({"solve", "--checkpoint", checkpoint(), "--problem", problem(0), "--set",
                        "domain_file=" + (dir_ / "gripper.pddl").string()});
  EXPECT_EQ(g.code, 2);
  write(dir_ / "gripper.pddl", pddl::to_pddl(*generators::bundled_domain("gripper")));
  auto r = genplan_cli({"solve", "--checkpoint", checkpoint(), "--problem", problem(0), "--set",
                        "domain_file=" + (dir_ / "gripper.pddl").string()});
  EXPECT_EQ(r.code, 1);
}

TEST_F(SolveTest, EvaluateRecordsAndCurves) {
  const fs::path out = dir_ / "eval";
  std::vector<std::string> args{"evaluate", "--checkpoint", checkpoint(), "--out", out.string(), "--set",
                                "eval_sizes=blocks:3;blocks:4", "--set", "instances=2", "--max-expansions", "500",
                                "--workers", "2"};
  auto r = genplan_cli(args);
  ASSERT_EQ(r.code, 0) << r.err;
  auto rec = lines(slurp(out / "records.csv"));
  ASSERT_EQ(rec.size(), 9u);
  EXPECT_EQ(rec[0], cli::kRecordHeader);
  std::size_t gnn = 0, hff = 0;
  for (std::size_t i = 1; i < rec.size(); ++i) (rec[i].rfind("gnn,", 0) == 0 ? gnn : hff)++;
  EXPECT_EQ(gnn, 4u);
  EXPECT_EQ(hff, 4u);
  EXPECT_EQ(count_files(out / "instances", ".pddl"), 4u);
  for (const char* curve : {"curve_expanded.csv", "curve_time.csv"}) {
    auto c = lines(slurp(out / curve));
    ASSERT_GE(c.size(), 3u);
    EXPECT_EQ(c[0], "method,budget,success_rate");
    std::map<std::string, std::pair<double, double>> last;
    for (std::size_t i = 1; i < c.size(); ++i) {
      std::istringstream row(c[i]);
      std::string method, b, s;
      std::getline(row, method, ',');
      std::getline(row, b, ',');
      std::getline(row, s, ',');
      auto [it, fresh] = last.try_emplace(method, -1.0, 0.0);
      EXPECT_GT(std::stod(b), it->second.first);
      EXPECT_GE(std::stod(s), it->second.second);
      EXPECT_LE(std::stod(s), 1.0);
      it->second = {std::stod(b), std::stod(s)};
    }
    EXPECT_EQ(last.size(), 2u);
  }
  auto domain = generators::bundled_domain("blocksworld");
  for (const char* method : {"gnn", "hff"}) {
    if (!fs::exists(out / "plans" / method)) continue;
    for (const auto& e : fs::directory_iterator(out / "plans" / method)) {
      auto task = cli::load_problem((out / "instances" / (e.path().stem().string() + ".pddl")).string(), domain);
      EXPECT_TRUE(search::validate_plan(*task, parse_plan(*task, slurp(e.path()))));
    }
  }

  // A second run reuses the cached instances unchanged.
  const auto before = fs::last_write_time(out / "instances" / cli::instance_file_name(0));
  const std::string first = slurp(out / "instances" / cli::instance_file_name(3));
  ASSERT_EQ(genplan_cli(args).code, 0);
  EXPECT_EQ(fs::last_write_time(out / "instances" / cli::instance_file_name(0)), before);
  EXPECT_EQ(slurp(out / "instances" / cli::instance_file_name(3)), first);
}

TEST_F(SolveTest, EvaluateAtZeroExpansionsCountsGreedySolves) {
  const fs::path out = dir_ / "eval0";
  auto r = genplan_cli({"evaluate", "--checkpoint", checkpoint(), "--out", out.string(), "--set",
                        "eval_sizes=blocks:2", "--set", "instances=4", "--max-expansions", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t greedy = 0;
  for (const auto& l : lines(slurp(out / "records.csv")))
    if (l.rfind("gnn,", 0) == 0) {
      EXPECT_NE(l.find(",0,0,"), std::string::npos) << l;
      greedy += l.find(",1,solved,") != std::string::npos;
    }
  auto c = lines(slurp(out / "curve_expanded.csv"));
  std::ostringstream want;
  want << "gnn,0," << static_cast<double>(greedy) / 4.0;
  EXPECT_EQ(c[1], want.str());
}

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "kdbirl/config.hpp"
#include "kdbirl/errors.hpp"
#include "kdbirl/io.hpp"

using namespace kdbirl;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("kdbirl_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* minimal = R"({
  "schema_version": 1,
  "environment": {"grid_size": 2},
  "tasks": [{"reward": [1, 0, 0, 0], "m": 10}],
  "test": {"reward": [0, 0, 0, 1], "n": 5},
  "method": {"prior": {"kind": "uniform", "lower": [0], "upper": [1]}}
})";

}  // namespace

TEST(Config, DefaultsApplied) {
  const auto c = parse_config(minimal);
  EXPECT_EQ(c.environment.kind, "gridworld");
  EXPECT_EQ(c.environment.gamma, 0.9);
  EXPECT_EQ(c.environment.alpha, 1.0);
  EXPECT_EQ(c.environment.expert, "boltzmann");
  EXPECT_FALSE(c.environment.horizon.has_value());
  EXPECT_EQ(c.method.id, "kdbirl");
  EXPECT_EQ(c.method.steps, 20000u);
  EXPECT_EQ(c.method.thin, 1u);
  EXPECT_EQ(c.eval.evd, "exact");
}

TEST(Config, RoundTripsThroughJson) {
  auto c = parse_config(minimal);
  c.seed = 123456789012345ULL;
  c.environment.horizon = 7;
  c.environment.starts = std::vector<double>{0.25, 0.25, 0.25, 0.25};
  c.method.h = 0.125;
  c.method.proposal_sd = std::vector<double>{0.1};
  c.eval.n_values = {50, 200, 500};
  c.eval.density_bandwidth = 0.3;
  c.sweep.seeds = {1, 2, 3};
  c.sweep.methods = {"kdbirl", "birl"};
  const auto text = to_json(c).dump();
  const auto again = parse_config(text);
  EXPECT_EQ(again, c);
  EXPECT_EQ(to_json(again).dump(), text);
}

TEST(Config, SyntheticRoundTrip) {
  const char* text = R"({
    "schema_version": 1,
    "environment": {"kind": "synthetic", "gamma": 0.8,
                    "synthetic": {"noise": 0.3, "seed": 5}},
    "tasks": [{"reward": [1, 0, 0], "m": 10}],
    "test": {"reward": [0, 0, 1], "n": 5},
    "method": {"prior": {"kind": "informative"}}
  })";
  const auto c = parse_config(text);
  EXPECT_EQ(c.environment.synthetic.noise, 0.3);
  EXPECT_EQ(parse_config(to_json(c).dump()), c);
}

TEST(Config, ValidationErrors) {
  const auto bad = [](const std::string& patch_key, nlohmann::json value) {
    auto j = nlohmann::json::parse(minimal);
    j[nlohmann::json::json_pointer(patch_key)] = value;
    return j.dump();
  };
  EXPECT_THROW(parse_config("{not json"), ConfigError);
  EXPECT_THROW(parse_config(bad("/schema_version", 2)), ConfigError);
  EXPECT_THROW(parse_config(bad("/test/reward", {0, 1})), ConfigError);
  EXPECT_THROW(parse_config(bad("/tasks/0/reward", {0, 1, 0})), ConfigError);
  EXPECT_THROW(parse_config(bad("/method/id", "avril")), ConfigError);
  EXPECT_THROW(parse_config(bad("/environment/gamma", 1.0)), ConfigError);
  EXPECT_THROW(parse_config(bad("/environment/kind", "maze")), ConfigError);
  EXPECT_THROW(parse_config(bad("/method/prior/kind", "laplace")), ConfigError);
  EXPECT_THROW(parse_config(bad("/method/prior/lower", {0, 0})), ConfigError);
  EXPECT_THROW(parse_config(bad("/method/steps", 0)), ConfigError);
  EXPECT_THROW(parse_config(bad("/method/d_s", "cosine")), ConfigError);
  EXPECT_THROW(parse_config(bad("/method/steps", "many")), ConfigError);
  EXPECT_THROW(parse_config(bad("/sweep/methods", {"kdbirl", "avril"})), ConfigError);
}

TEST(Io, FormatDoubleRoundTrips) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng) * std::pow(10.0, i % 20 - 10);
    EXPECT_EQ(std::stod(format_double(x)), x);
  }
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(0.5), "0.5");
}

TEST(Io, DemonstrationJsonLinesRoundTrip) {
  const auto dir = scratch("jsonl");
  std::vector<TrainingSample> t = {
      {Demonstration(3, 1), RewardParams::tabular({0, 0, 0, 1}), 0},
      {Demonstration(0, 4), RewardParams::tabular({0.25, 0, 0, 1}), 2}};
  write_file_atomic(dir / "t.jsonl", training_to_jsonl(t));
  EXPECT_EQ(read_training(dir / "t.jsonl", RewardKind::tabular), t);

  std::vector<Demonstration> d = {Demonstration(std::vector<double>{0.5, -1.25}, 2),
                                  Demonstration(1, 0)};
  write_file_atomic(dir / "d.jsonl", demonstrations_to_jsonl(d, -1));
  EXPECT_EQ(read_demonstrations(dir / "d.jsonl"), d);
  const auto text = read_file(dir / "d.jsonl");
  const auto first = nlohmann::json::parse(text.substr(0, text.find('\n')));
  EXPECT_EQ(first["task_id"], -1);
  EXPECT_TRUE(first.contains("feature_vector"));
}

TEST(Io, MalformedRecordsAreDataErrors) {
  const auto dir = scratch("bad");
  write_file_atomic(dir / "a.jsonl", "{\"state_index\": 1}\n");
  EXPECT_THROW(read_demonstrations(dir / "a.jsonl"), DataError);
  write_file_atomic(dir / "b.jsonl", "{oops\n");
  EXPECT_THROW(read_demonstrations(dir / "b.jsonl"), DataError);
  EXPECT_THROW(read_demonstrations(dir / "missing.jsonl"), DataError);
  write_file_atomic(dir / "c.csv", "r0,r1,log_posterior,accepted\n0.1,0.2,-3,1\n0.1,-3,1\n");
  EXPECT_THROW(read_chain_csv(dir / "c.csv", RewardKind::tabular), DataError);
  write_file_atomic(dir / "d.csv", "");
  EXPECT_THROW(read_chain_csv(dir / "d.csv", RewardKind::tabular), DataError);
}

TEST(Io, ChainCsvRoundTripIsExact) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  PosteriorChain c;
  for (int i = 0; i < 50; ++i) {
    c.draws.push_back({n(rng), n(rng), n(rng)});
    c.log_posterior.push_back(n(rng) * 100.0);
    c.accepted.push_back(i % 3 != 0);
  }
  c.burn_in = 10;
  c.thin = 2;
  const auto dir = scratch("chain");
  write_file_atomic(dir / "chain.csv", chain_to_csv(c));
  const auto back = read_chain_csv(dir / "chain.csv", RewardKind::featurized);
  const auto kept = c.retained();
  EXPECT_EQ(back.draws, kept.draws);
  EXPECT_EQ(back.log_posterior, kept.log_posterior);
  EXPECT_EQ(back.accepted, kept.accepted);
  EXPECT_EQ(chain_to_csv(back), chain_to_csv(c));
}

TEST(Io, AtomicWriteLeavesNoTemporaries) {
  const auto dir = scratch("atomic");
  write_file_atomic(dir / "sub" / "x.csv", "a\n1\n");
  write_file_atomic(dir / "sub" / "x.csv", "a\n2\n");
  EXPECT_EQ(read_file(dir / "sub" / "x.csv"), "a\n2\n");
  for (const auto& e : fs::directory_iterator(dir / "sub")) {
    EXPECT_EQ(e.path().extension(), ".csv");
  }
}

TEST(Io, CsvTableRejectsRaggedRows) {
  CsvTable t({"a", "b"});
  t.row(1, 2.5);
  EXPECT_EQ(t.str(), "a,b\n1,2.5\n");
  EXPECT_THROW(t.row(1), DataError);
}

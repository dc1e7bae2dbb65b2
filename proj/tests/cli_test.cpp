#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <set>
#include <sys/wait.h>
#include <filesystem>
#include <string>
#include <vector>

#include "kdbirl/config.hpp"
#include "kdbirl/errors.hpp"
#include "kdbirl/experiment.hpp"
#include "kdbirl/io.hpp"

using namespace kdbirl;

#ifndef KDBIRL_CLI
#error "KDBIRL_CLI must name the command-line executable"
#endif

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("kdbirl_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig small_2x2(std::size_t steps = 2000) {
  ExperimentConfig c;
  c.seed = 7;
  c.environment.grid_size = 2;
  c.tasks = {{{1, 0, 0, 0}, 300}, {{0, 1, 0, 0}, 300}};
  c.test = {{0, 0, 0, 1}, 100};
  c.method.prior.kind = "uniform";
  c.method.prior.lower = {0};
  c.method.prior.upper = {1};
  c.method.steps = steps;
  c.eval.subsample = 50;
  c.eval.density_points = 21;
  validate_config(c);
  return c;
}

int run_cli(const std::string& args, const fs::path& stderr_file = {}) {
  std::string cmd = std::string("\"") + KDBIRL_CLI + "\" " + args;
  cmd += stderr_file.empty() ? " 2>/dev/null" : " 2>\"" + stderr_file.string() + "\"";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path write_config(const fs::path& dir, const ExperimentConfig& c) {
  const auto path = dir / "config.json";
  write_file_atomic(path, to_json(c).dump(2));
  return path;
}

std::size_t line_count(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST(GenData, WritesTwoTaskTrainingAndTestFiles) {
  const auto dir = scratch("gen");
  const auto paths = cmd_gen_data(small_2x2(), dir);
  const auto env = build_environment(small_2x2().environment);
  const auto training = read_training(paths.training, RewardKind::tabular);
  ASSERT_EQ(training.size(), 600u);
  std::set<int> tasks;
  for (const auto& t : training) tasks.insert(t.task_id);
  EXPECT_EQ(tasks, (std::set<int>{0, 1}));
  EXPECT_EQ(read_demonstrations(paths.test).size(), 100u);
  const auto manifest = read_json_file(paths.manifest);
  EXPECT_EQ(manifest["tasks"].size(), 2u);
  for (const auto& t : manifest["tasks"]) EXPECT_LT(t["bellman_residual"].get<double>(), 1e-9);
  // informative prior moments recorded and equal to the direct formula
  const auto p = informative_prior_from_training(training, env.space());
  EXPECT_DOUBLE_EQ(manifest["informative_prior"]["mean"].get<double>(), p.mean[0]);
}

TEST(GenData, ByteIdenticalReruns) {
  const auto a = scratch("gen_a");
  const auto b = scratch("gen_b");
  cmd_gen_data(small_2x2(), a);
  cmd_gen_data(small_2x2(), b);
  for (const char* f : {"training.jsonl", "test.jsonl", "data_manifest.json"}) {
    EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
  }
}

TEST(GenData, AllTasksEmptyIsError) {
  auto c = small_2x2();
  for (auto& t : c.tasks) t.m = 0;
  const auto dir = scratch("gen_empty");
  EXPECT_THROW(cmd_gen_data(c, dir), ConfigError);
  EXPECT_TRUE(fs::is_empty(dir));
}

TEST(Fit, ZeroTestDemonstrationsIsError) {
  auto c = small_2x2();
  const auto env = build_environment(c.environment);
  c.test.n = 1;
  auto ds = make_dataset(c, env);
  ds.test.clear();
  EXPECT_THROW(run_kdbirl(c, env, ds), DataError);
  EXPECT_THROW(run_birl(c, env, ds), DataError);
}

TEST(Fit, ChainCsvHasRewardColumnsAndManifestFields) {
  const auto dir = scratch("fit");
  const auto c = small_2x2();
  cmd_gen_data(c, dir);
  const auto paths = cmd_fit(c, dir, dir);
  const auto chain = read_chain_csv(paths.chain, RewardKind::tabular);
  EXPECT_EQ(chain.dim(), 4u);
  EXPECT_EQ(chain.size(), 2000u - 400u);
  const auto m = read_json_file(paths.manifest);
  for (const char* k : {"seed", "steps", "burn_in", "thin", "proposal_sd", "h", "h_prime",
                        "acceptance_rate", "method", "alpha"}) {
    EXPECT_TRUE(m.contains(k)) << k;
  }
  EXPECT_EQ(m["method"], "kdbirl");
}

TEST(Fit, ParallelChainsConcatenateInOrder) {
  auto c = small_2x2(1000);
  c.method.chains = 3;
  const auto env = build_environment(c.environment);
  const auto ds = make_dataset(c, env);
  const auto multi = run_kdbirl(c, env, ds);
  EXPECT_EQ(multi.chain.size(), 3u * 800u);
  EXPECT_EQ(multi.manifest["per_chain"].size(), 3u);
  const auto again = run_kdbirl(c, env, ds);
  EXPECT_EQ(multi.chain.draws, again.chain.draws);
}

TEST(Eval, TrueRewardChainGivesZeroEvd) {
  const auto dir = scratch("eval_zero");
  const auto c = small_2x2();
  PosteriorChain chain;
  for (int i = 0; i < 20; ++i) {
    chain.draws.push_back({0, 0, 0, 1});
    chain.log_posterior.push_back(-1.0);
    chain.accepted.push_back(false);
  }
  write_file_atomic(dir / "chain.csv", chain_to_csv(chain));
  const auto paths = cmd_eval(c, dir / "chain.csv", dir);
  EXPECT_EQ(read_file(paths.evd), "n_test_demos,method,mean_evd,std_error\n100,kdbirl,0,0\n");
  const auto summary = read_file(paths.summary);
  const auto header = summary.substr(0, summary.find('\n'));
  EXPECT_EQ(header, "statistic,r0,r1,r2,r3");
  EXPECT_EQ(line_count(read_file(paths.density)), 1u + 4u * 21u);
}

TEST(Eval, MissingOrMismatchedChainIsDataError) {
  const auto dir = scratch("eval_bad");
  EXPECT_THROW(cmd_eval(small_2x2(), dir / "nope.csv", dir), DataError);
  write_file_atomic(dir / "chain.csv", "r0,r1,log_posterior,accepted\n0,1,-2,1\n");
  EXPECT_THROW(cmd_eval(small_2x2(), dir / "chain.csv", dir), DataError);
  EXPECT_FALSE(fs::exists(dir / "evd.csv"));
}

TEST(Sweep, CountsAndAggregation) {
  auto c = small_2x2(400);
  c.sweep.seeds = {1, 2, 3, 4, 5};
  c.eval.n_values = {10, 20, 40};
  c.sweep.methods = {"kdbirl", "birl"};
  c.eval.subsample = 20;
  const auto dir = scratch("sweep");
  const auto res = cmd_sweep(c, dir, 4);
  EXPECT_EQ(res.rows.size(), 30u);
  EXPECT_EQ(line_count(read_file(res.results)), 31u);
  EXPECT_EQ(line_count(read_file(res.aggregate)), 1u + 3u * 2u);
  // aggregate mean equals the mean of the sub-run evd files
  double total = 0.0;
  for (std::uint64_t seed : c.sweep.seeds) {
    total += read_evd_csv(dir / sweep_run_name(seed, 20, "birl") / "evd.csv").first;
  }
  const auto agg = read_file(res.aggregate);
  const auto pos = agg.find("\n20,birl,");
  ASSERT_NE(pos, std::string::npos);
  const auto cells = split_csv_line(agg.substr(pos + 1, agg.find('\n', pos + 1) - pos - 1));
  EXPECT_NEAR(std::stod(cells[2]), total / 5.0, 1e-12);
}

TEST(Sweep, SingleSeedReducesToEval) {
  auto c = small_2x2(600);
  c.sweep.seeds = {7};
  const auto dir = scratch("sweep_one");
  cmd_sweep(c, dir / "sweep", 1);
  cmd_gen_data(c, dir / "direct");
  cmd_fit(c, dir / "direct", dir / "direct");
  cmd_eval(c, dir / "direct" / "chain.csv", dir / "direct");
  EXPECT_EQ(read_file(dir / "sweep" / sweep_run_name(7, 100, "kdbirl") / "evd.csv"),
            read_file(dir / "direct" / "evd.csv"));
}

TEST(Sweep, FailedSubRunAbortsWithContext) {
  auto c = small_2x2(400);
  c.sweep.seeds = {1, 2};
  c.sweep.methods = {"birl", "kdbirl"};
  c.method.id = "birl";
  for (auto& t : c.tasks) t.m = 0;  // birl runs fine, kdbirl has no training set
  const auto dir = scratch("sweep_fail");
  try {
    cmd_sweep(c, dir, 2);
    FAIL() << "expected the sweep to fail";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("sub-run seed"), std::string::npos) << e.what();
  }
  EXPECT_FALSE(fs::exists(dir / "results.csv"));
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    EXPECT_NE(e.path().extension(), ".tmp") << e.path();
  }
}

TEST(SyntheticPipeline, RunsEndToEnd) {
  ExperimentConfig c;
  c.seed = 3;
  c.environment.kind = "synthetic";
  c.environment.horizon = 10;
  c.tasks = {{{1, 0, 0}, 100}, {{0, 1, 0}, 100}, {{0, 0, 1}, 100}};
  c.test = {{1, 0, 0}, 50};
  c.method.prior.kind = "informative";
  c.method.prior.lower = {-1};
  c.method.prior.upper = {1};
  c.method.steps = 800;
  c.eval.subsample = 20;
  validate_config(c);
  const auto dir = scratch("synthetic");
  cmd_gen_data(c, dir);
  const auto first = read_file(dir / "test.jsonl");
  EXPECT_NE(first.find("feature_vector"), std::string::npos);
  const auto fit = cmd_fit(c, dir, dir);
  EXPECT_EQ(read_chain_csv(fit.chain, RewardKind::featurized).dim(), 3u);
  const auto ev = cmd_eval(c, fit.chain, dir);
  EXPECT_GE(read_evd_csv(ev.evd).first, 0.0);
}

TEST(Cli, EveryCommandIsByteReproducible) {
  const auto dir = scratch("cli_repro");
  const auto cfg = write_config(dir, small_2x2(1500));
  for (const char* run : {"a", "b"}) {
    const auto out = (dir / run).string();
    ASSERT_EQ(run_cli("gen-data --config " + cfg.string() + " --out " + out), 0);
    ASSERT_EQ(run_cli("fit --config " + cfg.string() + " --out " + out), 0);
    ASSERT_EQ(run_cli("eval --config " + cfg.string() + " --out " + out), 0);
  }
  for (const char* f : {"training.jsonl", "test.jsonl", "chain.csv", "evd.csv", "summary.csv",
                        "density.csv", "evd_draws.csv"}) {
    EXPECT_EQ(read_file(dir / "a" / f), read_file(dir / "b" / f)) << f;
  }
}

TEST(Cli, SeedAndMethodOverrides) {
  const auto dir = scratch("cli_override");
  const auto cfg = write_config(dir, small_2x2(500));
  const auto out = (dir / "o").string();
  ASSERT_EQ(run_cli("gen-data --config " + cfg.string() + " --out " + out + " --seed 99"), 0);
  ASSERT_EQ(run_cli("fit --config " + cfg.string() + " --out " + out +
                    " --seed 99 --method birl"),
            0);
  const auto m = read_json_file(dir / "o" / "manifest.json");
  EXPECT_EQ(m["method"], "birl");
  EXPECT_EQ(m["seed"], 99);
}

TEST(Cli, UnknownMethodIsConfigurationErrorWithoutOutputs) {
  const auto dir = scratch("cli_unknown");
  auto j = to_json(small_2x2());
  j["method"]["id"] = "avril";
  write_file_atomic(dir / "config.json", j.dump());
  const auto err = dir / "stderr.txt";
  const auto out = dir / "out";
  EXPECT_EQ(run_cli("fit --config " + (dir / "config.json").string() + " --out " + out.string(),
                    err),
            2);
  EXPECT_FALSE(fs::exists(out));
  const auto record = nlohmann::json::parse(read_file(err));
  EXPECT_EQ(record["error"], "configuration");
  EXPECT_EQ(record["exit_code"], 2);
  EXPECT_EQ(run_cli("fit --config " + write_config(dir, small_2x2()).string() + " --out " +
                    out.string() + " --method avril"),
            2);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, MissingDataIsDataError) {
  const auto dir = scratch("cli_missing");
  const auto cfg = write_config(dir, small_2x2());
  EXPECT_EQ(run_cli("fit --config " + cfg.string() + " --out " + (dir / "empty").string()), 3);
  EXPECT_EQ(run_cli("eval --config " + cfg.string() + " --out " + (dir / "empty").string()), 3);
}

TEST(Cli, OutputRootFromEnvironment) {
  const auto dir = scratch("cli_env");
  const auto cfg = write_config(dir, small_2x2());
  const std::string cmd = "KDBIRL_OUTPUT_ROOT=\"" + (dir / "root").string() + "\" \"" +
                          KDBIRL_CLI + "\" gen-data --config \"" + cfg.string() + "\"";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(dir / "root" / "training.jsonl"));
}

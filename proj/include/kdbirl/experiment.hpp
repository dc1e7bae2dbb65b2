#pragma once

// Experiment orchestration: dataset generation, fitting, evaluation and
// sweeps. Each command reads and writes the documented file formats.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "kdbirl/baselines.hpp"
#include "kdbirl/config.hpp"
#include "kdbirl/demonstrations.hpp"
#include "kdbirl/density.hpp"
#include "kdbirl/errors.hpp"
#include "kdbirl/eval.hpp"
#include "kdbirl/inference.hpp"
#include "kdbirl/io.hpp"
#include "kdbirl/mdp.hpp"
#include "kdbirl/random.hpp"
#include "kdbirl/synthetic_env.hpp"

namespace kdbirl {

// Seed streams derived from the experiment seed.
namespace stream {
inline constexpr std::uint64_t test_demos = 1;
inline constexpr std::uint64_t task_demos = 1000;   // + task index
inline constexpr std::uint64_t mh_chain = 2000;     // + chain index
inline constexpr std::uint64_t chain_init = 3000;   // + chain index
inline constexpr std::uint64_t rollouts = 4000;
}  // namespace stream

struct Environment {
  TabularMdp mdp;
  std::optional<FeatureMap> phi;
  std::vector<std::vector<double>> anchors;  // synthetic only
  RewardKind kind = RewardKind::tabular;
  std::vector<double> starts;
  std::size_t horizon = 1;

  const FeatureMap* features() const { return phi ? &*phi : nullptr; }
  StateActionSpace space() const { return {mdp.n_states(), mdp.n_actions()}; }
  std::size_t reward_dim() const {
    return kind == RewardKind::tabular ? mdp.n_states() : phi->q();
  }
  bool vector_states() const { return !anchors.empty(); }
  RewardParams reward(const std::vector<double>& v) const { return {kind, v}; }
};

inline Environment build_environment(const EnvironmentConfig& e) {
  auto finish = [&](TabularMdp mdp, std::optional<FeatureMap> phi,
                    std::vector<std::vector<double>> anchors, RewardKind kind,
                    std::size_t default_horizon) {
    std::vector<double> starts = e.starts ? *e.starts : uniform_starts(mdp);
    check_starts(mdp, starts);
    return Environment{std::move(mdp),     std::move(phi),
                       std::move(anchors), kind,
                       std::move(starts),  e.horizon.value_or(default_horizon)};
  };
  if (e.kind == "synthetic") {
    SyntheticSpec spec = e.synthetic;
    spec.gamma = e.gamma;
    auto env = build_synthetic_environment(spec);
    return finish(std::move(env.mdp), std::move(env.phi), std::move(env.anchors),
                  RewardKind::featurized, 20);
  }
  if (e.kind != "gridworld") throw ConfigError("unknown environment " + e.kind);
  auto mdp = build_gridworld(e.grid_size, e.gamma, e.terminals);
  std::optional<FeatureMap> phi;
  RewardKind kind = RewardKind::tabular;
  if (e.features == "coordinates") {
    phi = coordinate_feature_map(e.grid_size);
    kind = RewardKind::featurized;
  }
  return finish(std::move(mdp), std::move(phi), {}, kind, 2 * e.grid_size);
}

struct ExpertPlan {
  Policy policy;
  double bellman_residual = 0.0;
};

inline ExpertPlan plan_expert(const Environment& env, const EnvironmentConfig& e,
                              const std::vector<double>& reward, double vi_tol) {
  const auto vf = value_iteration(env.mdp, env.reward(reward), env.features(), vi_tol);
  Policy policy = e.expert == "greedy" ? greedy_policy(vf.q)
                                       : boltzmann_policy(vf.q, e.alpha);
  return {std::move(policy), vf.residual};
}

inline std::vector<Demonstration> to_vector_states(const Environment& env,
                                                   const std::vector<Demonstration>& demos) {
  std::vector<Demonstration> out;
  out.reserve(demos.size());
  for (const auto& d : demos) out.emplace_back(env.anchors.at(d.state_index()), d.action);
  return out;
}

struct Dataset {
  std::vector<TrainingSample> training;
  std::vector<Demonstration> test;
  nlohmann::json manifest;
};

inline constexpr double expert_vi_tol = 1e-10;

// Plans each task's expert and rolls out its demonstrations.
inline Dataset make_dataset(const ExperimentConfig& cfg, const Environment& env) {
  std::size_t total_m = 0;
  for (const auto& t : cfg.tasks) total_m += t.m;
  if (total_m == 0 && cfg.method.id == "kdbirl") {
    throw ConfigError("KD-BIRL needs training data: every task has m = 0");
  }
  if (cfg.test.n == 0) throw ConfigError("test.n must be >= 1");

  Dataset ds;
  nlohmann::json tasks = nlohmann::json::array();
  for (std::size_t t = 0; t < cfg.tasks.size(); ++t) {
    const auto& task = cfg.tasks[t];
    const auto plan = plan_expert(env, cfg.environment, task.reward, expert_vi_tol);
    const std::uint64_t seed = derive_seed(cfg.seed, stream::task_demos + t);
    nlohmann::json record = {{"task_id", t},
                             {"reward", task.reward},
                             {"m", task.m},
                             {"seed", seed},
                             {"bellman_residual", plan.bellman_residual}};
    tasks.push_back(record);
    if (task.m == 0) continue;
    auto demos = generate_demonstrations(env.mdp, plan.policy, task.m, env.horizon,
                                         env.starts, seed);
    if (env.vector_states()) demos = to_vector_states(env, demos);
    for (auto& d : demos) {
      ds.training.push_back({std::move(d), env.reward(task.reward), static_cast<int>(t)});
    }
  }
  const auto plan = plan_expert(env, cfg.environment, cfg.test.reward, expert_vi_tol);
  const std::uint64_t test_seed = derive_seed(cfg.seed, stream::test_demos);
  ds.test = generate_demonstrations(env.mdp, plan.policy, cfg.test.n, env.horizon,
                                    env.starts, test_seed);
  if (env.vector_states()) ds.test = to_vector_states(env, ds.test);

  ds.manifest = {
      {"seed", cfg.seed},
      {"environment", to_json(cfg)["environment"]},
      {"horizon", env.horizon},
      {"tasks", tasks},
      {"test",
       {{"reward", cfg.test.reward},
        {"n", cfg.test.n},
        {"seed", test_seed},
        {"bellman_residual", plan.bellman_residual}}},
      {"n_training", ds.training.size()},
  };
  if (!ds.training.empty()) {
    const auto prior = informative_prior_from_training(ds.training, env.space(),
                                                       env.features());
    ds.manifest["informative_prior"] = {
        {"mean", prior.mean.front()},
        {"variance", prior.sd.front() * prior.sd.front()}};
  }
  return ds;
}

struct DatasetPaths {
  fs::path training;
  fs::path test;
  fs::path manifest;
};

inline DatasetPaths dataset_paths(const fs::path& dir) {
  return {dir / "training.jsonl", dir / "test.jsonl", dir / "data_manifest.json"};
}

inline DatasetPaths cmd_gen_data(const ExperimentConfig& cfg, const fs::path& out) {
  validate_config(cfg);
  const auto env = build_environment(cfg.environment);
  const auto ds = make_dataset(cfg, env);
  const auto paths = dataset_paths(out);
  write_file_atomic(paths.training, training_to_jsonl(ds.training));
  write_file_atomic(paths.test, demonstrations_to_jsonl(ds.test, -1));
  write_file_atomic(paths.manifest, ds.manifest.dump(2) + "\n");
  return paths;
}

inline Dataset load_dataset(const fs::path& dir, const Environment& env) {
  const auto paths = dataset_paths(dir);
  Dataset ds;
  ds.training = read_training(paths.training, env.kind);
  ds.test = read_demonstrations(paths.test);
  if (fs::exists(paths.manifest)) ds.manifest = read_json_file(paths.manifest);
  for (const auto& t : ds.training) {
    if (t.reward.dim() != env.reward_dim()) {
      throw DataError("training reward dimension differs from the environment");
    }
    check_demonstration(t.demo, env.mdp.n_states(), env.mdp.n_actions());
  }
  for (const auto& d : ds.test) {
    check_demonstration(d, env.mdp.n_states(), env.mdp.n_actions());
  }
  return ds;
}

namespace detail {

inline std::vector<double> broadcast(const std::vector<double>& v, std::size_t dim,
                                     const char* what) {
  if (v.size() == dim) return v;
  if (v.size() == 1) return std::vector<double>(dim, v.front());
  throw ConfigError(std::string(what) + " has wrong length");
}

inline std::vector<Interval> support_from(const PriorConfig& p, std::size_t dim) {
  if (p.lower.empty() && p.upper.empty()) return {};
  std::vector<double> lo(dim, -std::numeric_limits<double>::infinity());
  std::vector<double> hi(dim, std::numeric_limits<double>::infinity());
  if (!p.lower.empty()) lo = broadcast(p.lower, dim, "prior lower");
  if (!p.upper.empty()) hi = broadcast(p.upper, dim, "prior upper");
  std::vector<Interval> out;
  for (std::size_t i = 0; i < dim; ++i) out.push_back({lo[i], hi[i]});
  return out;
}

}  // namespace detail

inline PriorSpec resolve_prior(const PriorConfig& p, const Environment& env,
                               std::span<const TrainingSample> training) {
  const std::size_t dim = env.reward_dim();
  PriorSpec out;
  if (p.kind == "uniform") {
    out = UniformPrior{detail::broadcast(p.lower, dim, "prior lower"),
                       detail::broadcast(p.upper, dim, "prior upper")};
  } else if (p.kind == "normal") {
    out = NormalPrior{detail::broadcast(p.mean, dim, "prior mean"),
                      detail::broadcast(p.sd, dim, "prior sd"),
                      detail::support_from(p, dim)};
  } else if (p.kind == "informative") {
    out = informative_prior_from_training(training, env.space(), env.features(),
                                          detail::support_from(p, dim));
  } else {
    throw ConfigError("unknown prior kind '" + p.kind + "'");
  }
  validate_prior(out);
  return out;
}

inline nlohmann::json prior_to_json(const PriorSpec& prior) {
  if (auto* u = std::get_if<UniformPrior>(&prior)) {
    return {{"kind", "uniform"}, {"lower", u->lower}, {"upper", u->upper}};
  }
  const auto& n = std::get<NormalPrior>(prior);
  nlohmann::json j = {{"kind", "normal"}, {"mean", n.mean}, {"sd", n.sd}};
  if (!n.support.empty()) {
    std::vector<double> lo, hi;
    for (const auto& iv : n.support) {
      lo.push_back(iv.lower);
      hi.push_back(iv.upper);
    }
    j["lower"] = lo;
    j["upper"] = hi;
  }
  return j;
}

struct FitResult {
  PosteriorChain chain;  // retained draws of every chain, in chain order
  nlohmann::json manifest;
  double seconds_per_step = 0.0;
};

namespace detail {

// Runs `body(i)` for i in [0, n) on up to `jobs` threads. The first exception
// is rethrown after all workers finish.
template <class Body>
void parallel_for(std::size_t n, std::size_t jobs, Body&& body) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
}

template <class TargetFactory>
FitResult run_chains(const ExperimentConfig& cfg, const PriorSpec& prior,
                     RewardKind kind, TargetFactory&& make_target) {
  const auto& m = cfg.method;
  MhOptions opt;
  opt.steps = m.steps;
  opt.burn_in = m.burn_in.value_or(m.steps / 5);
  opt.thin = m.thin;
  opt.proposal_sd = m.proposal_sd ? *m.proposal_sd : default_proposal_sd(prior);

  std::vector<PosteriorChain> chains(m.chains);
  std::vector<double> seconds(m.chains);
  parallel_for(m.chains, m.chains, [&](std::size_t c) {
    auto target = make_target();
    Rng init_rng = make_rng(cfg.seed, stream::chain_init + c);
    MhOptions local = opt;
    local.seed = derive_seed(cfg.seed, stream::mh_chain + c);
    const auto t0 = std::chrono::steady_clock::now();
    chains[c] = metropolis_hastings(target, sample_prior(prior, init_rng), local, kind);
    seconds[c] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });

  FitResult out;
  out.chain.kind = kind;
  out.chain.seed = cfg.seed;
  nlohmann::json per_chain = nlohmann::json::array();
  double total_seconds = 0.0;
  double acceptance = 0.0;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const auto& ch = chains[c];
    const auto kept = ch.retained();
    out.chain.draws.insert(out.chain.draws.end(), kept.draws.begin(), kept.draws.end());
    out.chain.log_posterior.insert(out.chain.log_posterior.end(),
                                   kept.log_posterior.begin(), kept.log_posterior.end());
    out.chain.accepted.insert(out.chain.accepted.end(), kept.accepted.begin(),
                              kept.accepted.end());
    acceptance += ch.acceptance_rate() / static_cast<double>(chains.size());
    total_seconds += seconds[c];
    per_chain.push_back({{"seed", ch.seed},
                         {"acceptance_rate", ch.acceptance_rate()},
                         {"split_rhat", split_rhat(ch)}});
  }
  out.seconds_per_step =
      total_seconds / static_cast<double>(m.steps * chains.size());
  out.manifest = {
      {"method", m.id},
      {"seed", cfg.seed},
      {"steps", opt.steps},
      {"burn_in", opt.burn_in},
      {"thin", opt.thin},
      {"chains", m.chains},
      {"proposal_sd", opt.proposal_sd},
      {"acceptance_rate", acceptance},
      {"per_chain", per_chain},
      {"prior", prior_to_json(prior)},
      {"alpha", cfg.environment.alpha},
      {"reward_kind", to_string(kind)},
      {"n_test_demos", cfg.test.n},
      {"wall_seconds_per_step", out.seconds_per_step},
  };
  return out;
}

}  // namespace detail

// KD-BIRL posterior sampling over the configured reward kind.
inline FitResult run_kdbirl(const ExperimentConfig& cfg, const Environment& env,
                            const Dataset& ds) {
  if (ds.test.empty()) throw DataError("no test demonstrations: posterior undefined");
  if (ds.training.empty()) throw DataError("KD-BIRL needs a nonempty training set");
  const auto& m = cfg.method;
  KernelConfig kc;
  kc.d_s = distance_from_name(m.d_s);
  kc.d_r = distance_from_name(m.d_r);
  Bandwidths rule{1.0, 1.0};
  if (!m.h || !m.h_prime) {
    rule = rule_of_thumb_bandwidths(ds.training, env.space(), env.features(), kc.d_s, kc.d_r);
  }
  kc.h = m.h.value_or(rule.h);
  kc.h_prime = m.h_prime.value_or(rule.h_prime);
  const auto prior = resolve_prior(m.prior, env, ds.training);
  const CkdeLikelihood likelihood(ds.test, ds.training, kc, env.space(), env.features());
  auto out = detail::run_chains(cfg, prior, env.kind, [&] {
    return KdbirlPosterior(likelihood, prior);
  });
  out.manifest["h"] = kc.h;
  out.manifest["h_prime"] = kc.h_prime;
  out.manifest["d_s"] = m.d_s;
  out.manifest["d_r"] = m.d_r;
  out.manifest["n_training"] = ds.training.size();
  out.manifest["n_training_tasks"] = likelihood.n_tasks();
  return out;
}

// Q*-Boltzmann BIRL; re-plans on every target evaluation.
inline FitResult run_birl(const ExperimentConfig& cfg, const Environment& env,
                          const Dataset& ds) {
  if (ds.test.empty()) throw DataError("no test demonstrations: posterior undefined");
  if (env.vector_states()) throw ConfigError("birl needs tabular demonstrations");
  const auto& m = cfg.method;
  BirlConfig bc;
  bc.alpha = cfg.environment.alpha;
  bc.vi_tol = m.vi_tol;
  bc.prior = resolve_prior(m.prior, env, ds.training);
  auto out = detail::run_chains(cfg, bc.prior, env.kind, [&] {
    return BirlPosterior(env.mdp, ds.test, bc, env.kind, env.features());
  });
  out.manifest["vi_tol"] = bc.vi_tol;
  return out;
}

inline FitResult fit(const ExperimentConfig& cfg, const Environment& env,
                     const Dataset& ds) {
  if (cfg.method.id == "kdbirl") return run_kdbirl(cfg, env, ds);
  if (cfg.method.id == "birl") return run_birl(cfg, env, ds);
  throw ConfigError("unknown method id '" + cfg.method.id + "'");
}

struct FitPaths {
  fs::path chain;
  fs::path manifest;
};

inline FitPaths cmd_fit(const ExperimentConfig& cfg, const fs::path& data_dir,
                        const fs::path& out) {
  validate_config(cfg);
  const auto env = build_environment(cfg.environment);
  const auto ds = load_dataset(data_dir, env);
  auto result = fit(cfg, env, ds);
  if (ds.manifest.contains("informative_prior")) {
    result.manifest["informative_prior"] = ds.manifest["informative_prior"];
  }
  FitPaths paths{out / "chain.csv", out / "manifest.json"};
  write_file_atomic(paths.chain, chain_to_csv(result.chain));
  write_file_atomic(paths.manifest, result.manifest.dump(2) + "\n");
  return paths;
}

struct EvalResult {
  EvdReport evd;
  std::vector<DimensionSummary> summary;
  std::vector<std::vector<std::pair<double, double>>> density;  // per dimension
};

inline EvdEvaluator make_evd_evaluator(const ExperimentConfig& cfg, const Environment& env) {
  std::vector<double> starts = cfg.eval.starts ? *cfg.eval.starts : env.starts;
  const auto method = cfg.eval.evd == "rollout" ? EvdMethod::rollout : EvdMethod::exact;
  RolloutOptions ro{cfg.eval.rollout_episodes, cfg.eval.rollout_horizon,
                    derive_seed(cfg.seed, stream::rollouts)};
  return EvdEvaluator(env.mdp, env.reward(cfg.test.reward), env.features(),
                      std::move(starts), cfg.eval.vi_tol, method, ro);
}

inline EvalResult evaluate(const ExperimentConfig& cfg, const Environment& env,
                           const PosteriorChain& chain) {
  if (chain.retained_indices().empty()) throw DataError("chain is empty");
  if (chain.dim() != env.reward_dim()) {
    throw DataError("chain has " + std::to_string(chain.dim()) +
                    " columns, environment reward has " +
                    std::to_string(env.reward_dim()));
  }
  EvalResult out;
  out.evd = evd_report(chain, make_evd_evaluator(cfg, env), cfg.eval.subsample);
  out.summary = posterior_summary(chain);
  for (std::size_t d = 0; d < chain.dim(); ++d) {
    const auto xs = marginal_draws(chain, d);
    const double h = cfg.eval.density_bandwidth.value_or(silverman_bandwidth(xs));
    const auto [lo_it, hi_it] = std::minmax_element(xs.begin(), xs.end());
    const auto grid = linspace(*lo_it - 4.0 * h, *hi_it + 4.0 * h, cfg.eval.density_points);
    out.density.push_back(marginal_density_grid(chain, d, grid, h));
  }
  return out;
}

struct EvalPaths {
  fs::path evd;
  fs::path evd_draws;
  fs::path summary;
  fs::path density;
};

inline EvalPaths cmd_eval(const ExperimentConfig& cfg, const fs::path& chain_path,
                          const fs::path& out) {
  validate_config(cfg);
  const auto env = build_environment(cfg.environment);
  const auto chain = read_chain_csv(chain_path, env.kind);
  const auto res = evaluate(cfg, env, chain);

  CsvTable evd({"n_test_demos", "method", "mean_evd", "std_error"});
  evd.row(cfg.test.n, cfg.method.id, res.evd.mean_evd, res.evd.std_error);
  CsvTable draws({"draw", "evd"});
  for (const auto& [i, e] : res.evd.per_draw) draws.row(i, e);
  std::vector<std::string> header{"statistic"};
  for (std::size_t d = 0; d < res.summary.size(); ++d) header.push_back("r" + std::to_string(d));
  CsvTable summary(header);
  const std::pair<const char*, double DimensionSummary::*> stats[] = {
      {"mean", &DimensionSummary::mean}, {"sd", &DimensionSummary::sd},
      {"q05", &DimensionSummary::q05},   {"q50", &DimensionSummary::q50},
      {"q95", &DimensionSummary::q95}};
  for (const auto& [name, field] : stats) {
    std::vector<std::string> cells{name};
    for (const auto& s : res.summary) cells.push_back(format_double(s.*field));
    summary.row_cells(cells);
  }
  CsvTable density({"point", "density", "dimension"});
  for (std::size_t d = 0; d < res.density.size(); ++d) {
    for (const auto& [p, v] : res.density[d]) density.row(p, v, d);
  }
  EvalPaths paths{out / "evd.csv", out / "evd_draws.csv", out / "summary.csv",
                  out / "density.csv"};
  write_file_atomic(paths.evd, evd.str());
  write_file_atomic(paths.evd_draws, draws.str());
  write_file_atomic(paths.summary, summary.str());
  write_file_atomic(paths.density, density.str());
  return paths;
}

struct SweepRow {
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::string method;
  double mean_evd = 0.0;
  double std_error = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  fs::path results;
  fs::path aggregate;
};

inline std::string sweep_run_name(std::uint64_t seed, std::size_t n,
                                  const std::string& method) {
  return "seed" + std::to_string(seed) + "_n" + std::to_string(n) + "_" + method;
}

inline std::pair<double, double> read_evd_csv(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line) || !std::getline(in, line)) {
    throw DataError("evd file incomplete: " + path.string());
  }
  const auto cells = split_csv_line(line);
  if (cells.size() != 4) throw DataError("evd file malformed: " + path.string());
  return {parse_double(cells[2], path.string()), parse_double(cells[3], path.string())};
}

// gen-data -> fit -> eval for every (seed, n, method); each sub-run owns
// out/seed<S>_n<N>_<method>/.
inline SweepResult cmd_sweep(const ExperimentConfig& cfg, const fs::path& out,
                             std::size_t jobs = 1) {
  validate_config(cfg);
  const auto seeds = cfg.sweep.seeds.empty() ? std::vector<std::uint64_t>{cfg.seed}
                                             : cfg.sweep.seeds;
  const auto ns = cfg.eval.n_values.empty() ? std::vector<std::size_t>{cfg.test.n}
                                            : cfg.eval.n_values;
  const auto methods = cfg.sweep.methods.empty()
                           ? std::vector<std::string>{cfg.method.id}
                           : cfg.sweep.methods;
  struct Run {
    ExperimentConfig cfg;
    fs::path dir;
  };
  std::vector<Run> runs;
  for (auto seed : seeds) {
    for (auto n : ns) {
      for (const auto& method : methods) {
        ExperimentConfig sub = cfg;
        sub.seed = seed;
        sub.test.n = n;
        sub.method.id = method;
        sub.sweep = {};
        sub.eval.n_values = {};
        validate_config(sub);
        runs.push_back({std::move(sub), out / sweep_run_name(seed, n, method)});
      }
    }
  }
  SweepResult result;
  result.rows.resize(runs.size());
  detail::parallel_for(runs.size(), jobs, [&](std::size_t i) {
    const auto& run = runs[i];
    try {
      write_file_atomic(run.dir / "config.json", to_json(run.cfg).dump(2) + "\n");
      cmd_gen_data(run.cfg, run.dir);
      const auto fitted = cmd_fit(run.cfg, run.dir, run.dir);
      const auto evaluated = cmd_eval(run.cfg, fitted.chain, run.dir);
      const auto [mean, se] = read_evd_csv(evaluated.evd);
      result.rows[i] = {run.cfg.seed, run.cfg.test.n, run.cfg.method.id, mean, se};
    } catch (const Error& e) {
      throw Error(e.code(), "sub-run " + run.dir.filename().string() + ": " + e.what());
    } catch (const std::exception& e) {
      throw Error(ExitCode::data, "sub-run " + run.dir.filename().string() + ": " + e.what());
    }
  });

  CsvTable rows({"seed", "n_test_demos", "method", "mean_evd", "std_error"});
  for (const auto& r : result.rows) rows.row(r.seed, r.n, r.method, r.mean_evd, r.std_error);
  // Mean over seeds per (n, method); std_error across seeds.
  CsvTable agg({"n_test_demos", "method", "mean_evd", "std_error", "n_seeds"});
  for (auto n : ns) {
    for (const auto& method : methods) {
      std::vector<double> vals;
      for (const auto& r : result.rows) {
        if (r.n == n && r.method == method) vals.push_back(r.mean_evd);
      }
      double mean = 0.0;
      for (double v : vals) mean += v;
      mean /= static_cast<double>(vals.size());
      double se = 0.0;
      if (vals.size() > 1) {
        double ss = 0.0;
        for (double v : vals) ss += (v - mean) * (v - mean);
        se = std::sqrt(ss / static_cast<double>(vals.size() - 1)) /
             std::sqrt(static_cast<double>(vals.size()));
      }
      agg.row(n, method, mean, se, vals.size());
    }
  }
  result.results = out / "results.csv";
  result.aggregate = out / "aggregate.csv";
  write_file_atomic(result.results, rows.str());
  write_file_atomic(result.aggregate, agg.str());
  return result;
}

}  // namespace kdbirl

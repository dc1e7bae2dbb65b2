#pragma once

// Declarative experiment configuration (one JSON document per experiment).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "kdbirl/errors.hpp"
#include "kdbirl/synthetic_env.hpp"

namespace kdbirl {

inline constexpr int config_schema_version = 1;

struct EnvironmentConfig {
  std::string kind = "gridworld";  // gridworld | synthetic
  std::size_t grid_size = 2;
  double gamma = 0.9;
  std::vector<std::size_t> terminals;
  double alpha = 1.0;
  std::optional<std::size_t> horizon;  // default 2 * grid_size
  std::string expert = "boltzmann";    // boltzmann | greedy
  std::string features = "none";       // none | coordinates
  std::optional<std::vector<double>> starts;  // default uniform non-terminal
  SyntheticSpec synthetic;  // its gamma is ignored; `gamma` above applies

  bool operator==(const EnvironmentConfig&) const = default;
};

struct TaskConfig {
  std::vector<double> reward;
  std::size_t m = 0;
  bool operator==(const TaskConfig&) const = default;
};

struct TestConfig {
  std::vector<double> reward;
  std::size_t n = 0;
  bool operator==(const TestConfig&) const = default;
};

// Length-1 vectors broadcast to the reward dimension.
struct PriorConfig {
  std::string kind = "uniform";  // uniform | normal | informative
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> mean;
  std::vector<double> sd;
  bool operator==(const PriorConfig&) const = default;
};

struct MethodConfig {
  std::string id = "kdbirl";  // kdbirl | birl
  PriorConfig prior;
  std::size_t steps = 20000;
  std::optional<std::size_t> burn_in;  // default 20% of steps
  std::size_t thin = 1;
  std::optional<std::vector<double>> proposal_sd;  // default 5% of prior range
  std::optional<double> h;
  std::optional<double> h_prime;
  std::string d_s = "euclidean";
  std::string d_r = "euclidean";
  std::size_t chains = 1;
  double vi_tol = 1e-8;

  bool operator==(const MethodConfig&) const = default;
};

struct EvalConfig {
  std::optional<std::vector<double>> starts;  // default: environment starts
  std::size_t subsample = 200;                // 0 = every retained draw
  std::vector<std::size_t> n_values;
  std::string evd = "exact";                  // exact | rollout
  std::size_t density_points = 101;
  std::optional<double> density_bandwidth;    // default Silverman
  double vi_tol = 1e-10;
  std::size_t rollout_episodes = 200;
  std::size_t rollout_horizon = 100;

  bool operator==(const EvalConfig&) const = default;
};

struct SweepConfig {
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> methods;
  bool operator==(const SweepConfig&) const = default;
};

struct ExperimentConfig {
  int schema_version = config_schema_version;
  std::uint64_t seed = 0;
  EnvironmentConfig environment;
  std::vector<TaskConfig> tasks;
  TestConfig test;
  MethodConfig method;
  EvalConfig eval;
  SweepConfig sweep;

  bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

using json = nlohmann::json;

template <class T>
json optional_to_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> optional_from_json(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

template <class T>
T value_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

}  // namespace detail

inline nlohmann::json to_json(const ExperimentConfig& c) {
  using nlohmann::json;
  using detail::optional_to_json;
  const auto& e = c.environment;
  json env = {
      {"kind", e.kind},
      {"grid_size", e.grid_size},
      {"gamma", e.gamma},
      {"terminals", e.terminals},
      {"alpha", e.alpha},
      {"horizon", optional_to_json(e.horizon)},
      {"expert", e.expert},
      {"features", e.features},
      {"starts", optional_to_json(e.starts)},
      {"synthetic",
       {{"n_states", e.synthetic.n_states},
        {"state_dim", e.synthetic.state_dim},
        {"feature_dim", e.synthetic.feature_dim},
        {"n_actions", e.synthetic.n_actions},
        {"noise", e.synthetic.noise},
        {"drift", e.synthetic.drift},
        {"seed", e.synthetic.seed}}},
  };
  json tasks = json::array();
  for (const auto& t : c.tasks) tasks.push_back({{"reward", t.reward}, {"m", t.m}});
  const auto& m = c.method;
  json method = {
      {"id", m.id},
      {"prior",
       {{"kind", m.prior.kind},
        {"lower", m.prior.lower},
        {"upper", m.prior.upper},
        {"mean", m.prior.mean},
        {"sd", m.prior.sd}}},
      {"steps", m.steps},
      {"burn_in", optional_to_json(m.burn_in)},
      {"thin", m.thin},
      {"proposal_sd", optional_to_json(m.proposal_sd)},
      {"h", optional_to_json(m.h)},
      {"h_prime", optional_to_json(m.h_prime)},
      {"d_s", m.d_s},
      {"d_r", m.d_r},
      {"chains", m.chains},
      {"vi_tol", m.vi_tol},
  };
  const auto& v = c.eval;
  json eval = {
      {"starts", optional_to_json(v.starts)},
      {"subsample", v.subsample},
      {"n_values", v.n_values},
      {"evd", v.evd},
      {"density_points", v.density_points},
      {"density_bandwidth", optional_to_json(v.density_bandwidth)},
      {"vi_tol", v.vi_tol},
      {"rollout_episodes", v.rollout_episodes},
      {"rollout_horizon", v.rollout_horizon},
  };
  return {
      {"schema_version", c.schema_version},
      {"seed", c.seed},
      {"environment", env},
      {"tasks", tasks},
      {"test", {{"reward", c.test.reward}, {"n", c.test.n}}},
      {"method", method},
      {"eval", eval},
      {"sweep", {{"seeds", c.sweep.seeds}, {"methods", c.sweep.methods}}},
  };
}

// Missing keys take their defaults; type errors become ConfigError.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using detail::optional_from_json;
  using detail::value_or;
  using nlohmann::json;
  ExperimentConfig c;
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    c.schema_version = value_or(j, "schema_version", config_schema_version);
    c.seed = value_or<std::uint64_t>(j, "seed", 0);

    const json env = j.value("environment", json::object());
    auto& e = c.environment;
    e.kind = value_or<std::string>(env, "kind", e.kind);
    e.grid_size = value_or(env, "grid_size", e.grid_size);
    e.gamma = value_or(env, "gamma", e.gamma);
    e.terminals = value_or(env, "terminals", e.terminals);
    e.alpha = value_or(env, "alpha", e.alpha);
    e.horizon = optional_from_json<std::size_t>(env, "horizon");
    e.expert = value_or<std::string>(env, "expert", e.expert);
    e.features = value_or<std::string>(env, "features", e.features);
    e.starts = optional_from_json<std::vector<double>>(env, "starts");
    const json syn = env.value("synthetic", json::object());
    auto& s = e.synthetic;
    s.n_states = value_or(syn, "n_states", s.n_states);
    s.state_dim = value_or(syn, "state_dim", s.state_dim);
    s.feature_dim = value_or(syn, "feature_dim", s.feature_dim);
    s.n_actions = value_or(syn, "n_actions", s.n_actions);
    s.noise = value_or(syn, "noise", s.noise);
    s.drift = value_or(syn, "drift", s.drift);
    s.seed = value_or<std::uint64_t>(syn, "seed", s.seed);

    for (const auto& t : j.value("tasks", json::array())) {
      c.tasks.push_back({t.at("reward").get<std::vector<double>>(),
                         value_or<std::size_t>(t, "m", 0)});
    }
    const json test = j.value("test", json::object());
    c.test.reward = value_or(test, "reward", std::vector<double>{});
    c.test.n = value_or<std::size_t>(test, "n", 0);

    const json method = j.value("method", json::object());
    auto& m = c.method;
    m.id = value_or<std::string>(method, "id", m.id);
    const json prior = method.value("prior", json::object());
    m.prior.kind = value_or<std::string>(prior, "kind", m.prior.kind);
    m.prior.lower = value_or(prior, "lower", std::vector<double>{});
    m.prior.upper = value_or(prior, "upper", std::vector<double>{});
    m.prior.mean = value_or(prior, "mean", std::vector<double>{});
    m.prior.sd = value_or(prior, "sd", std::vector<double>{});
    m.steps = value_or(method, "steps", m.steps);
    m.burn_in = optional_from_json<std::size_t>(method, "burn_in");
    m.thin = value_or(method, "thin", m.thin);
    m.proposal_sd = optional_from_json<std::vector<double>>(method, "proposal_sd");
    m.h = optional_from_json<double>(method, "h");
    m.h_prime = optional_from_json<double>(method, "h_prime");
    m.d_s = value_or<std::string>(method, "d_s", m.d_s);
    m.d_r = value_or<std::string>(method, "d_r", m.d_r);
    m.chains = value_or(method, "chains", m.chains);
    m.vi_tol = value_or(method, "vi_tol", m.vi_tol);

    const json eval = j.value("eval", json::object());
    auto& v = c.eval;
    v.starts = optional_from_json<std::vector<double>>(eval, "starts");
    v.subsample = value_or(eval, "subsample", v.subsample);
    v.n_values = value_or(eval, "n_values", v.n_values);
    v.evd = value_or<std::string>(eval, "evd", v.evd);
    v.density_points = value_or(eval, "density_points", v.density_points);
    v.density_bandwidth = optional_from_json<double>(eval, "density_bandwidth");
    v.vi_tol = value_or(eval, "vi_tol", v.vi_tol);
    v.rollout_episodes = value_or(eval, "rollout_episodes", v.rollout_episodes);
    v.rollout_horizon = value_or(eval, "rollout_horizon", v.rollout_horizon);

    const json sweep = j.value("sweep", json::object());
    c.sweep.seeds = value_or(sweep, "seeds", std::vector<std::uint64_t>{});
    c.sweep.methods = value_or(sweep, "methods", std::vector<std::string>{});
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("malformed config: ") + ex.what());
  }
  return c;
}

inline std::size_t reward_dimension(const EnvironmentConfig& e) {
  if (e.kind == "synthetic") return e.synthetic.feature_dim;
  if (e.features == "coordinates") return 2;
  return e.grid_size * e.grid_size;
}

inline void validate_config(const ExperimentConfig& c) {
  if (c.schema_version != config_schema_version) {
    throw ConfigError("unsupported schema_version " +
                      std::to_string(c.schema_version));
  }
  const auto& e = c.environment;
  if (e.kind != "gridworld" && e.kind != "synthetic") {
    throw ConfigError("unknown environment kind '" + e.kind + "'");
  }
  if (e.kind == "gridworld" && e.grid_size < 2) {
    throw ConfigError("grid_size must be >= 2");
  }
  if (e.kind == "gridworld" && e.features != "none" && e.features != "coordinates") {
    throw ConfigError("unknown feature map '" + e.features + "'");
  }
  if (!(e.gamma >= 0.0 && e.gamma < 1.0)) throw ConfigError("gamma must be in [0, 1)");
  if (!(e.alpha > 0.0)) throw ConfigError("alpha must be > 0");
  if (e.expert != "boltzmann" && e.expert != "greedy") {
    throw ConfigError("unknown expert '" + e.expert + "'");
  }
  if (e.horizon && *e.horizon == 0) throw ConfigError("horizon must be >= 1");

  const std::size_t dim = reward_dimension(e);
  for (std::size_t t = 0; t < c.tasks.size(); ++t) {
    if (c.tasks[t].reward.size() != dim) {
      throw ConfigError("task " + std::to_string(t) + " reward has length " +
                        std::to_string(c.tasks[t].reward.size()) + ", expected " +
                        std::to_string(dim));
    }
  }
  if (c.test.reward.size() != dim) {
    throw ConfigError("test reward has length " + std::to_string(c.test.reward.size()) +
                      ", expected " + std::to_string(dim));
  }

  const auto& m = c.method;
  if (m.id != "kdbirl" && m.id != "birl") {
    throw ConfigError("unknown method id '" + m.id + "'");
  }
  if (m.id == "birl" && e.kind == "synthetic") {
    throw ConfigError("birl needs tabular demonstrations; synthetic is featurized");
  }
  for (const auto& id : c.sweep.methods) {
    if (id != "kdbirl" && id != "birl") {
      throw ConfigError("unknown method id '" + id + "' in sweep");
    }
  }
  const auto& p = m.prior;
  if (p.kind != "uniform" && p.kind != "normal" && p.kind != "informative") {
    throw ConfigError("unknown prior kind '" + p.kind + "'");
  }
  if (p.kind == "uniform" && (p.lower.empty() || p.upper.empty())) {
    throw ConfigError("uniform prior needs lower and upper");
  }
  if (p.kind == "normal" && (p.mean.empty() || p.sd.empty())) {
    throw ConfigError("normal prior needs mean and sd");
  }
  for (const auto* v : {&p.lower, &p.upper, &p.mean, &p.sd}) {
    if (!v->empty() && v->size() != 1 && v->size() != dim) {
      throw ConfigError("prior vectors must have length 1 or " + std::to_string(dim));
    }
  }
  if (m.steps == 0) throw ConfigError("steps must be > 0");
  if (m.burn_in && *m.burn_in >= m.steps) throw ConfigError("burn_in must be < steps");
  if (m.thin == 0) throw ConfigError("thin must be >= 1");
  if (m.chains == 0) throw ConfigError("chains must be >= 1");
  if (m.h && !(*m.h > 0.0)) throw ConfigError("h must be > 0");
  if (m.h_prime && !(*m.h_prime > 0.0)) throw ConfigError("h_prime must be > 0");
  if (!(m.vi_tol > 0.0)) throw ConfigError("vi_tol must be > 0");
  for (const auto& name : {m.d_s, m.d_r}) {
    if (name != "euclidean" && name != "manhattan") {
      throw ConfigError("unknown distance '" + name + "'");
    }
  }
  if (c.eval.evd != "exact" && c.eval.evd != "rollout") {
    throw ConfigError("unknown evd estimator '" + c.eval.evd + "'");
  }
  if (c.eval.density_points == 0) throw ConfigError("density_points must be > 0");
}

inline ExperimentConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("config is not valid JSON: ") + ex.what());
  }
  auto c = config_from_json(j);
  validate_config(c);
  return c;
}

}  // namespace kdbirl

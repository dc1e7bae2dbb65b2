#pragma once

// Q*-Boltzmann Bayesian IRL likelihood and the training-set informative prior.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "kdbirl/demonstrations.hpp"
#include "kdbirl/density.hpp"
#include "kdbirl/errors.hpp"
#include "kdbirl/inference.hpp"
#include "kdbirl/mdp.hpp"

namespace kdbirl {

struct BirlConfig {
  double alpha = 1.0;
  double vi_tol = 1e-8;
  PriorSpec prior = UniformPrior{};

  void validate() const {
    if (!(alpha > 0.0)) throw ConfigError("alpha must be > 0");
    if (!(vi_tol > 0.0)) throw ConfigError("vi_tol must be > 0");
  }
};

// sum_i [alpha Q*(s_i, a_i) - logsumexp_a' alpha Q*(s_i, a')]
inline double boltzmann_log_likelihood(std::span<const Demonstration> demos,
                                       const QTable& q, double alpha) {
  double total = 0.0;
  for (const auto& d : demos) {
    if (!d.has_index()) throw DataError("BIRL needs tabular demonstrations");
    check_demonstration(d, q.n_states(), q.n_actions());
    const auto logp = boltzmann_log_probabilities(q.row(d.state_index()), alpha);
    total += logp[d.action];
  }
  return total;
}

inline double birl_log_likelihood(std::span<const Demonstration> demos,
                                  const RewardParams& reward,
                                  const TabularMdp& mdp, const BirlConfig& cfg,
                                  const FeatureMap* phi = nullptr) {
  cfg.validate();
  if (demos.empty()) throw DataError("no test demonstrations");
  const auto vf = value_iteration(mdp, reward, phi, cfg.vi_tol);
  return boltzmann_log_likelihood(demos, vf.q, cfg.alpha);
}

// BIRL log-posterior for one chain. Each call re-plans, warm-started from the
// previous call's value function; the cache is chain-local state.
class BirlPosterior {
 public:
  BirlPosterior(const TabularMdp& mdp, std::vector<Demonstration> demos,
                BirlConfig cfg, RewardKind kind = RewardKind::tabular,
                const FeatureMap* phi = nullptr)
      : mdp_(&mdp),
        phi_(phi),
        demos_(std::move(demos)),
        cfg_(std::move(cfg)),
        kind_(kind) {
    cfg_.validate();
    validate_prior(cfg_.prior);
    if (demos_.empty()) throw DataError("no test demonstrations");
    for (const auto& d : demos_) {
      if (!d.has_index()) throw DataError("BIRL needs tabular demonstrations");
      check_demonstration(d, mdp.n_states(), mdp.n_actions());
    }
  }

  double operator()(std::span<const double> x) const {
    const double lp = log_prior(x, cfg_.prior);
    if (lp == neg_inf) return neg_inf;
    const RewardParams reward(kind_, {x.begin(), x.end()});
    const auto r = reward_table(*mdp_, reward, phi_);
    auto vf = value_iteration_table(*mdp_, r, cfg_.vi_tol, warm_);
    warm_ = std::move(vf.v);
    ++plans_;
    return lp + boltzmann_log_likelihood(demos_, vf.q, cfg_.alpha);
  }

  std::size_t plans() const { return plans_; }

 private:
  const TabularMdp* mdp_;
  const FeatureMap* phi_;
  std::vector<Demonstration> demos_;
  BirlConfig cfg_;
  RewardKind kind_;
  mutable std::vector<double> warm_;
  mutable std::size_t plans_ = 0;
};

inline constexpr double informative_sd_floor = 1e-3;

// R_j(s_j, a_j) for one training sample.
inline double training_reward_value(const TrainingSample& t,
                                    const StateActionSpace& space,
                                    const FeatureMap* phi) {
  if (t.reward.kind() == RewardKind::tabular) {
    if (!t.demo.has_index()) {
      throw DataError("tabular training reward needs a state index");
    }
    if (t.demo.state_index() >= t.reward.dim()) {
      throw DataError("training state outside reward vector");
    }
    return t.reward[t.demo.state_index()];
  }
  if (phi == nullptr) throw ConfigError("featurized reward needs a feature map");
  const auto f = encode_state_action(t.demo, space, phi);
  double acc = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) acc += f[i] * t.reward[i];
  return acc;
}

// Normal(mu0, sigma0^2) with mu0, sigma0^2 the mean and population variance
// of R_j(s_j, a_j) over the training set, broadcast to every dimension.
inline NormalPrior informative_prior_from_training(
    std::span<const TrainingSample> training, const StateActionSpace& space,
    const FeatureMap* phi = nullptr, std::vector<Interval> support = {}) {
  if (training.empty()) throw DataError("training set is empty");
  check_training_set(training);
  std::vector<double> values;
  values.reserve(training.size());
  for (const auto& t : training) {
    values.push_back(training_reward_value(t, space, phi));
  }
  // Sorting makes the sums independent of sample order.
  std::sort(values.begin(), values.end());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  const std::size_t dim = training.front().reward.dim();
  NormalPrior prior;
  prior.mean.assign(dim, mean);
  prior.sd.assign(dim, std::max(std::sqrt(var), informative_sd_floor));
  prior.support = std::move(support);
  return prior;
}

}  // namespace kdbirl

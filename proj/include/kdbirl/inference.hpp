#pragma once

// Priors, the KD-BIRL log-posterior and random-walk Metropolis-Hastings.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "kdbirl/density.hpp"
#include "kdbirl/errors.hpp"
#include "kdbirl/mdp.hpp"
#include "kdbirl/random.hpp"

namespace kdbirl {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

struct UniformPrior {
  std::vector<double> lower;
  std::vector<double> upper;
  bool operator==(const UniformPrior&) const = default;
};

// Independent normals, optionally truncated to `support`.
struct NormalPrior {
  std::vector<double> mean;
  std::vector<double> sd;
  std::vector<Interval> support;  // empty = unbounded
  bool operator==(const NormalPrior&) const = default;
};

using PriorSpec = std::variant<UniformPrior, NormalPrior>;

inline std::size_t prior_dim(const PriorSpec& prior) {
  if (auto* u = std::get_if<UniformPrior>(&prior)) return u->lower.size();
  return std::get<NormalPrior>(prior).mean.size();
}

inline void validate_prior(const PriorSpec& prior) {
  if (auto* u = std::get_if<UniformPrior>(&prior)) {
    if (u->lower.empty() || u->lower.size() != u->upper.size()) {
      throw ConfigError("uniform prior bounds must be nonempty and equal length");
    }
    for (std::size_t i = 0; i < u->lower.size(); ++i) {
      if (!(u->lower[i] < u->upper[i])) {
        throw ConfigError("uniform prior needs lower < upper");
      }
    }
    return;
  }
  const auto& n = std::get<NormalPrior>(prior);
  if (n.mean.empty() || n.mean.size() != n.sd.size()) {
    throw ConfigError("normal prior mean and sd must be nonempty and equal length");
  }
  for (double s : n.sd) {
    if (!(s > 0.0)) throw ConfigError("normal prior needs sd > 0");
  }
  if (!n.support.empty()) {
    if (n.support.size() != n.mean.size()) {
      throw ConfigError("normal prior support has wrong length");
    }
    for (const auto& iv : n.support) {
      if (!(iv.lower < iv.upper)) throw ConfigError("empty prior support");
    }
  }
}

inline std::vector<Interval> prior_support(const PriorSpec& prior) {
  if (auto* u = std::get_if<UniformPrior>(&prior)) {
    std::vector<Interval> out;
    for (std::size_t i = 0; i < u->lower.size(); ++i) {
      out.push_back({u->lower[i], u->upper[i]});
    }
    return out;
  }
  const auto& n = std::get<NormalPrior>(prior);
  if (!n.support.empty()) return n.support;
  return std::vector<Interval>(n.mean.size());
}

// log p(R) up to an additive constant; -inf outside the support.
inline double log_prior(std::span<const double> x, const PriorSpec& prior) {
  if (x.size() != prior_dim(prior)) {
    throw ConfigError("reward has dimension " + std::to_string(x.size()) +
                      ", prior has " + std::to_string(prior_dim(prior)));
  }
  if (auto* u = std::get_if<UniformPrior>(&prior)) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!(x[i] >= u->lower[i] && x[i] <= u->upper[i])) return neg_inf;
    }
    return 0.0;
  }
  const auto& n = std::get<NormalPrior>(prior);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!n.support.empty() && !n.support[i].contains(x[i])) return neg_inf;
    const double z = (x[i] - n.mean[i]) / n.sd[i];
    acc -= 0.5 * z * z;
  }
  return acc;
}

inline double log_prior(const RewardParams& reward, const PriorSpec& prior) {
  return log_prior(std::span<const double>(reward.values()), prior);
}

// 0.05 x (prior range) per dimension. The range of an unbounded normal is
// taken as 4 sd.
inline std::vector<double> default_proposal_sd(const PriorSpec& prior) {
  std::vector<double> out;
  if (auto* u = std::get_if<UniformPrior>(&prior)) {
    for (std::size_t i = 0; i < u->lower.size(); ++i) {
      out.push_back(0.05 * (u->upper[i] - u->lower[i]));
    }
    return out;
  }
  const auto& n = std::get<NormalPrior>(prior);
  for (std::size_t i = 0; i < n.mean.size(); ++i) {
    double range = 4.0 * n.sd[i];
    if (!n.support.empty()) {
      range = std::min(range, n.support[i].upper - n.support[i].lower);
    }
    out.push_back(0.05 * range);
  }
  return out;
}

// A draw from the prior; truncated normals use rejection.
inline std::vector<double> sample_prior(const PriorSpec& prior, Rng& rng) {
  std::vector<double> out;
  if (auto* u = std::get_if<UniformPrior>(&prior)) {
    for (std::size_t i = 0; i < u->lower.size(); ++i) {
      std::uniform_real_distribution<double> dist(u->lower[i], u->upper[i]);
      out.push_back(dist(rng));
    }
    return out;
  }
  const auto& n = std::get<NormalPrior>(prior);
  for (std::size_t i = 0; i < n.mean.size(); ++i) {
    std::normal_distribution<double> dist(n.mean[i], n.sd[i]);
    double v = dist(rng);
    for (int tries = 0; !n.support.empty() && !n.support[i].contains(v); ++tries) {
      if (tries > 10000) {
        v = std::clamp(n.mean[i], n.support[i].lower, n.support[i].upper);
        break;
      }
      v = dist(rng);
    }
    out.push_back(v);
  }
  return out;
}

// log p(R) + sum_i log p_hat(s_i, a_i | R), evaluated directly from the
// training set.
inline double log_posterior(const RewardParams& reward,
                            std::span<const Demonstration> demos,
                            std::span<const TrainingSample> training,
                            const KernelConfig& cfg,
                            const StateActionSpace& space,
                            const FeatureMap* phi, const PriorSpec& prior) {
  const double lp = log_prior(reward, prior);
  if (lp == neg_inf) return neg_inf;
  return lp + joint_ckde_log_likelihood(demos, reward, training, cfg, space, phi);
}

// Same target with the R-independent parts of the likelihood precomputed.
class KdbirlPosterior {
 public:
  KdbirlPosterior(CkdeLikelihood likelihood, PriorSpec prior)
      : likelihood_(std::move(likelihood)), prior_(std::move(prior)) {
    validate_prior(prior_);
    if (prior_dim(prior_) != likelihood_.dim()) {
      throw ConfigError("prior dimension differs from reward dimension");
    }
  }

  double operator()(std::span<const double> x) const {
    const double lp = log_prior(x, prior_);
    if (lp == neg_inf) return neg_inf;
    return lp + likelihood_(x);
  }

  const CkdeLikelihood& likelihood() const { return likelihood_; }
  const PriorSpec& prior() const { return prior_; }

 private:
  CkdeLikelihood likelihood_;
  PriorSpec prior_;
};

struct MhOptions {
  std::size_t steps = 10000;
  std::vector<double> proposal_sd;  // one per dimension, or a single value
  std::uint64_t seed = 0;
  std::size_t burn_in = 0;
  std::size_t thin = 1;
};

// Every MH step in order. A rejected step repeats the previous draw.
struct PosteriorChain {
  RewardKind kind = RewardKind::tabular;
  std::vector<std::vector<double>> draws;
  std::vector<double> log_posterior;
  std::vector<bool> accepted;
  std::uint64_t seed = 0;
  std::size_t burn_in = 0;
  std::size_t thin = 1;

  std::size_t size() const { return draws.size(); }
  std::size_t dim() const { return draws.empty() ? 0 : draws.front().size(); }

  double acceptance_rate() const {
    if (accepted.empty()) return 0.0;
    const auto n = std::count(accepted.begin(), accepted.end(), true);
    return static_cast<double>(n) / static_cast<double>(accepted.size());
  }

  std::vector<std::size_t> retained_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = burn_in; i < draws.size(); i += std::max<std::size_t>(thin, 1)) {
      out.push_back(i);
    }
    return out;
  }

  // Retained draws only, with burn-in 0 and thin 1.
  PosteriorChain retained() const {
    PosteriorChain out;
    out.kind = kind;
    out.seed = seed;
    for (std::size_t i : retained_indices()) {
      out.draws.push_back(draws[i]);
      out.log_posterior.push_back(log_posterior[i]);
      out.accepted.push_back(accepted[i]);
    }
    return out;
  }
};

template <class Target>
PosteriorChain metropolis_hastings(const Target& target,
                                   std::vector<double> init,
                                   const MhOptions& opt,
                                   RewardKind kind = RewardKind::tabular) {
  if (init.empty()) throw ConfigError("initial state is empty");
  if (!(opt.steps > opt.burn_in)) {
    throw ConfigError("steps must exceed burn-in");
  }
  if (opt.thin == 0) throw ConfigError("thin must be >= 1");
  std::vector<double> sd = opt.proposal_sd;
  if (sd.size() == 1) sd.assign(init.size(), sd.front());
  if (sd.size() != init.size()) {
    throw ConfigError("proposal scale has wrong dimension");
  }
  for (double s : sd) {
    if (!(s > 0.0)) throw ConfigError("proposal scale must be > 0");
  }

  double current_lp = target(std::span<const double>(init));
  if (!std::isfinite(current_lp)) {
    throw NumericalError("target is not finite at the initial state");
  }

  Rng rng(mix_seed(opt.seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  PosteriorChain chain;
  chain.kind = kind;
  chain.seed = opt.seed;
  chain.burn_in = opt.burn_in;
  chain.thin = opt.thin;
  chain.draws.reserve(opt.steps);
  chain.log_posterior.reserve(opt.steps);
  chain.accepted.reserve(opt.steps);

  std::vector<double> current = std::move(init);
  std::vector<double> proposal(current.size());
  for (std::size_t step = 0; step < opt.steps; ++step) {
    for (std::size_t i = 0; i < current.size(); ++i) {
      proposal[i] = current[i] + sd[i] * normal(rng);
    }
    const double u = unif(rng);
    const double lp = target(std::span<const double>(proposal));
    if (std::isnan(lp)) throw NumericalError("target returned NaN");
    const bool accept = lp != neg_inf && std::log(u) < lp - current_lp;
    if (accept) {
      current = proposal;
      current_lp = lp;
    }
    chain.draws.push_back(current);
    chain.log_posterior.push_back(current_lp);
    chain.accepted.push_back(accept);
  }
  return chain;
}

// Split-chain potential scale reduction per dimension over the retained
// draws: the retained draws are cut in two halves and compared.
inline std::vector<double> split_rhat(const PosteriorChain& chain) {
  const auto idx = chain.retained_indices();
  const std::size_t half = idx.size() / 2;
  std::vector<double> out(chain.dim(), std::numeric_limits<double>::quiet_NaN());
  if (half < 2) return out;
  for (std::size_t d = 0; d < chain.dim(); ++d) {
    double mean[2] = {0.0, 0.0};
    double var[2] = {0.0, 0.0};
    for (int part = 0; part < 2; ++part) {
      for (std::size_t k = 0; k < half; ++k) {
        mean[part] += chain.draws[idx[part * half + k]][d];
      }
      mean[part] /= static_cast<double>(half);
      for (std::size_t k = 0; k < half; ++k) {
        const double diff = chain.draws[idx[part * half + k]][d] - mean[part];
        var[part] += diff * diff;
      }
      var[part] /= static_cast<double>(half - 1);
    }
    const double n = static_cast<double>(half);
    const double grand = 0.5 * (mean[0] + mean[1]);
    const double between =
        n * ((mean[0] - grand) * (mean[0] - grand) +
             (mean[1] - grand) * (mean[1] - grand));
    const double within = 0.5 * (var[0] + var[1]);
    if (within == 0.0) {
      out[d] = between == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
      continue;
    }
    const double pooled = (n - 1.0) / n * within + between / n;
    out[d] = std::sqrt(pooled / within);
  }
  return out;
}

}  // namespace kdbirl

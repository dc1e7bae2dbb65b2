#pragma once

// Expected value difference, posterior summaries and marginal densities.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "kdbirl/demonstrations.hpp"
#include "kdbirl/errors.hpp"
#include "kdbirl/inference.hpp"
#include "kdbirl/mdp.hpp"
#include "kdbirl/random.hpp"

namespace kdbirl {

enum class EvdMethod { exact, rollout };

struct RolloutOptions {
  std::size_t episodes = 200;
  std::size_t horizon = 100;
  std::uint64_t seed = 0;
};

// Monte Carlo estimate of E_starts[sum_t gamma^t r(s_t, a_t)], truncated at
// `horizon`. Episode k uses its own derived generator, so two policies
// evaluated with the same seed share start states.
inline double rollout_policy_value(const TabularMdp& mdp, const Policy& policy,
                                   std::span<const double> r,
                                   std::span<const double> starts,
                                   const RolloutOptions& opt) {
  check_starts(mdp, starts);
  if (opt.episodes == 0 || opt.horizon == 0) {
    throw ConfigError("rollout needs episodes > 0 and horizon > 0");
  }
  const std::size_t na = mdp.n_actions();
  double total = 0.0;
  for (std::size_t k = 0; k < opt.episodes; ++k) {
    Rng rng = make_rng(opt.seed, k);
    std::size_t s = sample_index<Rng>(starts, rng);
    double discount = 1.0;
    double ret = 0.0;
    for (std::size_t t = 0; t < opt.horizon; ++t) {
      const std::size_t a = sample_action(policy, s, na, rng);
      ret += discount * r[s * na + a];
      discount *= mdp.gamma();
      const auto& succ = mdp.successors(s, a);
      std::vector<double> w;
      w.reserve(succ.size());
      for (const auto& x : succ) w.push_back(x.probability);
      s = succ[sample_index<Rng>(w, rng)].state;
    }
    total += ret;
  }
  return total / static_cast<double>(opt.episodes);
}

// Evaluates |V^{pi*, R*} - V^{pi(draw), R*}| for many draws against one true
// reward; pi* and V^{pi*, R*} are computed once.
class EvdEvaluator {
 public:
  EvdEvaluator(const TabularMdp& mdp, const RewardParams& true_reward,
               const FeatureMap* phi, std::vector<double> starts,
               double vi_tol = 1e-10, EvdMethod method = EvdMethod::exact,
               RolloutOptions rollout = {})
      : mdp_(&mdp),
        phi_(phi),
        kind_(true_reward.kind()),
        dim_(true_reward.dim()),
        starts_(std::move(starts)),
        vi_tol_(vi_tol),
        method_(method),
        rollout_(rollout) {
    check_starts(mdp, starts_);
    true_r_ = reward_table(mdp, true_reward, phi);
    const auto vf = value_iteration_table(mdp, true_r_, vi_tol_);
    optimal_value_ = value_of(greedy_policy(vf.q));
  }

  double optimal_value() const { return optimal_value_; }

  Policy policy_for(std::span<const double> draw) const {
    if (draw.size() != dim_) throw ConfigError("draw has wrong dimension");
    const RewardParams reward(kind_, {draw.begin(), draw.end()});
    const auto r = reward_table(*mdp_, reward, phi_);
    return greedy_policy(value_iteration_table(*mdp_, r, vi_tol_).q);
  }

  double value_of(const Policy& policy) const {
    if (method_ == EvdMethod::rollout) {
      return rollout_policy_value(*mdp_, policy, true_r_, starts_, rollout_);
    }
    const auto v = policy_state_values(*mdp_, policy, true_r_);
    double total = 0.0;
    double mass = 0.0;
    for (std::size_t s = 0; s < v.size(); ++s) {
      total += starts_[s] * v[s];
      mass += starts_[s];
    }
    return total / mass;
  }

  double operator()(std::span<const double> draw) const {
    return std::abs(optimal_value_ - value_of(policy_for(draw)));
  }

 private:
  const TabularMdp* mdp_;
  const FeatureMap* phi_;
  RewardKind kind_;
  std::size_t dim_;
  std::vector<double> starts_;
  double vi_tol_;
  EvdMethod method_;
  RolloutOptions rollout_;
  std::vector<double> true_r_;
  double optimal_value_ = 0.0;
};

inline double evd(const RewardParams& draw, const RewardParams& true_reward,
                  const TabularMdp& mdp, const FeatureMap* phi,
                  std::span<const double> starts) {
  if (draw.kind() != true_reward.kind() || draw.dim() != true_reward.dim()) {
    throw ConfigError("draw and true reward differ in kind or dimension");
  }
  EvdEvaluator ev(mdp, true_reward, phi, {starts.begin(), starts.end()});
  return ev(std::span<const double>(draw.values()));
}

struct EvdReport {
  double mean_evd = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
  std::vector<std::pair<std::size_t, double>> per_draw;  // (draw index, evd)
};

// `subsample` = 0 evaluates every retained draw; otherwise that many draws
// evenly spaced over the retained ones.
inline std::vector<std::size_t> subsample_indices(const std::vector<std::size_t>& idx,
                                                  std::size_t subsample) {
  if (subsample == 0 || subsample >= idx.size()) return idx;
  std::vector<std::size_t> out;
  out.reserve(subsample);
  for (std::size_t k = 0; k < subsample; ++k) {
    out.push_back(idx[k * idx.size() / subsample]);
  }
  return out;
}

inline EvdReport evd_report(const PosteriorChain& chain,
                            const EvdEvaluator& evaluator,
                            std::size_t subsample = 0) {
  const auto idx = subsample_indices(chain.retained_indices(), subsample);
  if (idx.empty()) throw DataError("chain has no retained draws");
  EvdReport rep;
  rep.n_samples = idx.size();
  for (std::size_t i : idx) {
    rep.per_draw.emplace_back(i, evaluator(chain.draws[i]));
  }
  double sum = 0.0;
  for (const auto& [i, e] : rep.per_draw) sum += e;
  rep.mean_evd = sum / static_cast<double>(idx.size());
  if (idx.size() > 1) {
    double ss = 0.0;
    for (const auto& [i, e] : rep.per_draw) {
      ss += (e - rep.mean_evd) * (e - rep.mean_evd);
    }
    const double sd = std::sqrt(ss / static_cast<double>(idx.size() - 1));
    rep.std_error = sd / std::sqrt(static_cast<double>(idx.size()));
  }
  return rep;
}

inline EvdReport evd_report(const PosteriorChain& chain,
                            const RewardParams& true_reward,
                            const TabularMdp& mdp, const FeatureMap* phi,
                            std::span<const double> starts,
                            std::size_t subsample = 0) {
  EvdEvaluator ev(mdp, true_reward, phi, {starts.begin(), starts.end()});
  return evd_report(chain, ev, subsample);
}

struct DimensionSummary {
  double mean = 0.0;
  double sd = 0.0;
  double q05 = 0.0;
  double q50 = 0.0;
  double q95 = 0.0;
};

// Linear interpolation between order statistics, position p * (n - 1).
inline double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw DataError("quantile of empty sample");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline std::vector<DimensionSummary> posterior_summary(const PosteriorChain& chain) {
  const auto idx = chain.retained_indices();
  if (idx.empty()) throw DataError("chain has no retained draws");
  std::vector<DimensionSummary> out(chain.dim());
  std::vector<double> column(idx.size());
  for (std::size_t d = 0; d < chain.dim(); ++d) {
    for (std::size_t k = 0; k < idx.size(); ++k) column[k] = chain.draws[idx[k]][d];
    auto& s = out[d];
    double sum = 0.0;
    for (double v : column) sum += v;
    s.mean = sum / static_cast<double>(column.size());
    if (column.size() > 1) {
      double ss = 0.0;
      for (double v : column) ss += (v - s.mean) * (v - s.mean);
      s.sd = std::sqrt(ss / static_cast<double>(column.size() - 1));
    }
    std::sort(column.begin(), column.end());
    s.q05 = quantile_sorted(column, 0.05);
    s.q50 = quantile_sorted(column, 0.50);
    s.q95 = quantile_sorted(column, 0.95);
  }
  return out;
}

inline std::vector<double> posterior_mean(const PosteriorChain& chain) {
  std::vector<double> out;
  for (const auto& s : posterior_summary(chain)) out.push_back(s.mean);
  return out;
}

// Silverman's rule for a 1-D normalized Gaussian KDE, floored.
inline double silverman_bandwidth(std::span<const double> xs) {
  if (xs.size() < 2) return 0.05;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  return std::max(1.06 * sd * std::pow(static_cast<double>(xs.size()), -0.2), 1e-3);
}

inline std::vector<double> marginal_draws(const PosteriorChain& chain,
                                          std::size_t dim) {
  if (dim >= chain.dim()) throw ConfigError("dimension out of range");
  std::vector<double> xs;
  for (std::size_t i : chain.retained_indices()) xs.push_back(chain.draws[i][dim]);
  return xs;
}

// Normalized 1-D Gaussian KDE of one coordinate of the retained draws.
inline std::vector<std::pair<double, double>> marginal_density_grid(
    const PosteriorChain& chain, std::size_t dim, std::span<const double> grid,
    double h) {
  if (grid.empty()) throw ConfigError("density grid is empty");
  if (!(h > 0.0)) throw ConfigError("density bandwidth must be > 0");
  const auto xs = marginal_draws(chain, dim);
  if (xs.empty()) throw DataError("chain has no retained draws");
  const double norm =
      1.0 / (static_cast<double>(xs.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  std::vector<std::pair<double, double>> out;
  out.reserve(grid.size());
  for (double p : grid) {
    double acc = 0.0;
    for (double x : xs) {
      const double u = (p - x) / h;
      acc += std::exp(-0.5 * u * u);
    }
    out.emplace_back(p, acc * norm);
  }
  return out;
}

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = n == 1 ? lo
                    : lo + (hi - lo) * static_cast<double>(i) /
                               static_cast<double>(n - 1);
  }
  return out;
}

}  // namespace kdbirl

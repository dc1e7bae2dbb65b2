#pragma once

// Kernels, distances, bandwidth selection and the conditional kernel density
// estimate of p(s, a | R) built from training tasks with known rewards.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kdbirl/demonstrations.hpp"
#include "kdbirl/errors.hpp"
#include "kdbirl/mdp.hpp"

namespace kdbirl {

inline constexpr double bandwidth_floor = 1e-6;

// Unnormalized Gaussian kernel, K(0) = 1. `u` is distance / bandwidth.
inline double gaussian_kernel(double u) { return std::exp(-0.5 * u * u); }
inline double log_gaussian_kernel(double u) { return -0.5 * u * u; }

enum class KernelId { gaussian };

inline double log_kernel(KernelId id, double u) {
  switch (id) {
    case KernelId::gaussian:
      return log_gaussian_kernel(u);
  }
  throw ConfigError("unknown kernel");
}

enum class DistanceId { euclidean, manhattan };

inline DistanceId distance_from_name(const std::string& name) {
  if (name == "euclidean") return DistanceId::euclidean;
  if (name == "manhattan") return DistanceId::manhattan;
  throw ConfigError("unknown distance '" + name + "'");
}

inline const char* to_string(DistanceId id) {
  return id == DistanceId::euclidean ? "euclidean" : "manhattan";
}

inline double euclidean_distance(std::span<const double> a,
                                 std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ConfigError("distance between vectors of length " +
                      std::to_string(a.size()) + " and " +
                      std::to_string(b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

inline double manhattan_distance(std::span<const double> a,
                                 std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("distance length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return acc;
}

inline double distance(DistanceId id, std::span<const double> a,
                       std::span<const double> b) {
  const double d = id == DistanceId::euclidean ? euclidean_distance(a, b)
                                               : manhattan_distance(a, b);
  if (!std::isfinite(d)) throw NumericalError("non-finite distance");
  return d;
}

struct KernelConfig {
  double h = 1.0;        // state-action bandwidth
  double h_prime = 1.0;  // reward bandwidth
  DistanceId d_s = DistanceId::euclidean;
  DistanceId d_r = DistanceId::euclidean;
  KernelId kernel = KernelId::gaussian;
  KernelId reward_kernel = KernelId::gaussian;

  void validate() const {
    if (!(h > 0.0) || !(h_prime > 0.0) || !std::isfinite(h) ||
        !std::isfinite(h_prime)) {
      throw ConfigError("bandwidths must be finite and > 0");
    }
  }
};

struct StateActionSpace {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
};

struct TrainingSample {
  Demonstration demo;
  RewardParams reward;
  int task_id = 0;

  bool operator==(const TrainingSample&) const = default;
};

// The vector d_s acts on: one-hot(state) ++ one-hot(action) without a
// feature map, phi(s, a) with one.
inline std::vector<double> encode_state_action(const Demonstration& demo,
                                               const StateActionSpace& space,
                                               const FeatureMap* phi) {
  if (phi != nullptr) {
    if (demo.has_index()) {
      auto f = (*phi)(demo.state_index(), demo.action);
      return {f.begin(), f.end()};
    }
    if (!phi->projection()) {
      throw ConfigError("vector-valued state needs a feature projection");
    }
    return phi->projection()->apply(demo.state_vector(), demo.action);
  }
  if (!demo.has_index()) {
    throw ConfigError("tabular encoding needs a state index");
  }
  check_demonstration(demo, space.n_states, space.n_actions);
  std::vector<double> out(space.n_states + space.n_actions, 0.0);
  out[demo.state_index()] = 1.0;
  out[space.n_states + demo.action] = 1.0;
  return out;
}

inline void check_training_set(std::span<const TrainingSample> training) {
  if (training.empty()) throw DataError("training set is empty");
  const auto kind = training.front().reward.kind();
  const auto dim = training.front().reward.dim();
  for (const auto& t : training) {
    if (t.reward.kind() != kind || t.reward.dim() != dim) {
      throw DataError("training rewards differ in kind or dimension");
    }
  }
}

// Distinct vectors with multiplicities, in lexicographic order.
using VectorGroups = std::vector<std::pair<std::vector<double>, std::size_t>>;

inline VectorGroups group_vectors(const std::vector<std::vector<double>>& xs) {
  std::map<std::vector<double>, std::size_t> counts;
  for (const auto& x : xs) ++counts[x];
  return {counts.begin(), counts.end()};
}

// Population variance of d(x_i, x_j) over all pairs i != j.
inline double pairwise_distance_variance(const VectorGroups& groups,
                                         DistanceId metric) {
  std::vector<std::pair<double, double>> weighted;  // (distance, pair count)
  double total = 0.0;
  for (std::size_t u = 0; u < groups.size(); ++u) {
    const double cu = static_cast<double>(groups[u].second);
    if (cu > 1.0) {
      weighted.emplace_back(0.0, cu * (cu - 1.0) / 2.0);
      total += cu * (cu - 1.0) / 2.0;
    }
    for (std::size_t v = u + 1; v < groups.size(); ++v) {
      const double w = cu * static_cast<double>(groups[v].second);
      weighted.emplace_back(distance(metric, groups[u].first, groups[v].first), w);
      total += w;
    }
  }
  if (total == 0.0) return 0.0;
  double mean = 0.0;
  for (auto [d, w] : weighted) mean += w * d;
  mean /= total;
  double var = 0.0;
  for (auto [d, w] : weighted) var += w * (d - mean) * (d - mean);
  return var / total;
}

struct Bandwidths {
  double h = 1.0;
  double h_prime = 1.0;
};

// h = Var(d_s) over encoded training demonstrations, h' = Var(d_r) over
// training rewards; self-pairs excluded, both floored.
inline Bandwidths rule_of_thumb_bandwidths(std::span<const TrainingSample> training,
                                           const StateActionSpace& space,
                                           const FeatureMap* phi,
                                           DistanceId d_s = DistanceId::euclidean,
                                           DistanceId d_r = DistanceId::euclidean) {
  if (training.size() < 2) {
    throw DataError("bandwidth selection needs at least two training samples");
  }
  check_training_set(training);
  std::vector<std::vector<double>> encodings;
  std::vector<std::vector<double>> rewards;
  encodings.reserve(training.size());
  rewards.reserve(training.size());
  for (const auto& t : training) {
    encodings.push_back(encode_state_action(t.demo, space, phi));
    rewards.push_back(t.reward.values());
  }
  Bandwidths bw;
  bw.h = std::max(bandwidth_floor,
                  pairwise_distance_variance(group_vectors(encodings), d_s));
  bw.h_prime = std::max(bandwidth_floor,
                        pairwise_distance_variance(group_vectors(rewards), d_r));
  return bw;
}

// log p_hat(s, a | R) =
//   logsumexp_j [log K(d_s/h) + log K'(d_r(R, R_j)/h')]
//   - logsumexp_l log K'(d_r(R, R_l)/h')
inline double ckde_log_likelihood(const Demonstration& demo,
                                  const RewardParams& reward,
                                  std::span<const TrainingSample> training,
                                  const KernelConfig& cfg,
                                  const StateActionSpace& space,
                                  const FeatureMap* phi) {
  check_training_set(training);
  cfg.validate();
  if (reward.kind() != training.front().reward.kind() ||
      reward.dim() != training.front().reward.dim()) {
    throw ConfigError("reward kind/dimension differs from the training set");
  }
  const auto x = encode_state_action(demo, space, phi);
  std::vector<double> joint(training.size());
  std::vector<double> marginal(training.size());
  for (std::size_t j = 0; j < training.size(); ++j) {
    const auto xj = encode_state_action(training[j].demo, space, phi);
    const double ks = log_kernel(cfg.kernel, distance(cfg.d_s, x, xj) / cfg.h);
    const double kr = log_kernel(
        cfg.reward_kernel,
        distance(cfg.d_r, reward.values(), training[j].reward.values()) /
            cfg.h_prime);
    joint[j] = ks + kr;
    marginal[j] = kr;
  }
  const double out = log_sum_exp(joint) - log_sum_exp(marginal);
  if (std::isnan(out)) throw NumericalError("ckde likelihood is NaN");
  return out;
}

inline double joint_ckde_log_likelihood(std::span<const Demonstration> demos,
                                        const RewardParams& reward,
                                        std::span<const TrainingSample> training,
                                        const KernelConfig& cfg,
                                        const StateActionSpace& space,
                                        const FeatureMap* phi) {
  if (demos.empty()) throw DataError("no test demonstrations");
  double total = 0.0;
  for (const auto& d : demos) {
    total += ckde_log_likelihood(d, reward, training, cfg, space, phi);
  }
  return total;
}

// Product-kernel KDE of the joint (x, y): (1/m) sum_j K(d(x,x_j)/h) K'(d(y,y_j)/h').
inline double kde_joint(std::span<const double> x, std::span<const double> y,
                        const std::vector<std::vector<double>>& x_data,
                        const std::vector<std::vector<double>>& y_data,
                        double h, double h_prime,
                        DistanceId dx = DistanceId::euclidean,
                        DistanceId dy = DistanceId::euclidean) {
  if (x_data.empty()) throw DataError("kde over empty data");
  if (x_data.size() != y_data.size()) {
    throw DataError("joint kde data columns differ in length");
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < x_data.size(); ++j) {
    acc += gaussian_kernel(distance(dx, x, x_data[j]) / h) *
           gaussian_kernel(distance(dy, y, y_data[j]) / h_prime);
  }
  return acc / static_cast<double>(x_data.size());
}

// (1/m) sum_j K(d(x, x_j)/h)
inline double kde_marginal(std::span<const double> x,
                           const std::vector<std::vector<double>>& data,
                           double h, DistanceId dx = DistanceId::euclidean) {
  if (data.empty()) throw DataError("kde over empty data");
  double acc = 0.0;
  for (const auto& xj : data) acc += gaussian_kernel(distance(dx, x, xj) / h);
  return acc / static_cast<double>(data.size());
}

// Joint CKDE log-likelihood of a fixed set of test demonstrations, with
// everything that does not depend on R precomputed. Training samples are
// grouped by distinct reward vector and test demonstrations by distinct
// encoding; the result equals joint_ckde_log_likelihood up to rounding.
class CkdeLikelihood {
 public:
  CkdeLikelihood(std::span<const Demonstration> demos,
                 std::span<const TrainingSample> training, KernelConfig cfg,
                 const StateActionSpace& space, const FeatureMap* phi)
      : cfg_(cfg) {
    if (demos.empty()) throw DataError("no test demonstrations");
    check_training_set(training);
    cfg_.validate();
    kind_ = training.front().reward.kind();
    dim_ = training.front().reward.dim();

    // reward -> (encoding -> count)
    std::map<std::vector<double>, std::map<std::vector<double>, std::size_t>>
        by_reward;
    for (const auto& t : training) {
      ++by_reward[t.reward.values()][encode_state_action(t.demo, space, phi)];
    }
    std::vector<std::vector<double>> test_enc;
    test_enc.reserve(demos.size());
    for (const auto& d : demos) {
      test_enc.push_back(encode_state_action(d, space, phi));
    }
    const auto test_groups = group_vectors(test_enc);

    for (const auto& [reward, encodings] : by_reward) {
      std::size_t count = 0;
      for (const auto& [enc, c] : encodings) count += c;
      task_rewards_.push_back(reward);
      log_task_counts_.push_back(std::log(static_cast<double>(count)));
    }
    const std::size_t n_tasks = task_rewards_.size();
    multiplicity_.reserve(test_groups.size());
    log_state_sums_.reserve(test_groups.size() * n_tasks);
    std::vector<double> terms;
    for (const auto& [x, mult] : test_groups) {
      multiplicity_.push_back(static_cast<double>(mult));
      for (const auto& [reward, encodings] : by_reward) {
        terms.clear();
        for (const auto& [enc, c] : encodings) {
          terms.push_back(std::log(static_cast<double>(c)) +
                          log_kernel(cfg_.kernel, distance(cfg_.d_s, x, enc) / cfg_.h));
        }
        log_state_sums_.push_back(log_sum_exp(terms));
      }
    }
  }

  std::size_t n_tasks() const { return task_rewards_.size(); }
  std::size_t n_distinct_demos() const { return multiplicity_.size(); }
  RewardKind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  const KernelConfig& config() const { return cfg_; }

  double operator()(std::span<const double> reward) const {
    if (reward.size() != dim_) {
      throw ConfigError("reward dimension differs from the training set");
    }
    const std::size_t n_tasks = task_rewards_.size();
    std::vector<double> log_w(n_tasks);
    std::vector<double> denom_terms(n_tasks);
    for (std::size_t t = 0; t < n_tasks; ++t) {
      log_w[t] = log_kernel(cfg_.reward_kernel,
                            distance(cfg_.d_r, reward, task_rewards_[t]) /
                                cfg_.h_prime);
      denom_terms[t] = log_task_counts_[t] + log_w[t];
    }
    const double log_denominator = log_sum_exp(denom_terms);
    std::vector<double> terms(n_tasks);
    double total = 0.0;
    for (std::size_t i = 0; i < multiplicity_.size(); ++i) {
      for (std::size_t t = 0; t < n_tasks; ++t) {
        terms[t] = log_w[t] + log_state_sums_[i * n_tasks + t];
      }
      total += multiplicity_[i] * (log_sum_exp(terms) - log_denominator);
    }
    if (std::isnan(total)) throw NumericalError("ckde likelihood is NaN");
    return total;
  }

  double operator()(const RewardParams& reward) const {
    if (reward.kind() != kind_) {
      throw ConfigError("reward kind differs from the training set");
    }
    return (*this)(std::span<const double>(reward.values()));
  }

 private:
  KernelConfig cfg_;
  RewardKind kind_ = RewardKind::tabular;
  std::size_t dim_ = 0;
  std::vector<std::vector<double>> task_rewards_;
  std::vector<double> log_task_counts_;
  std::vector<double> multiplicity_;
  std::vector<double> log_state_sums_;  // [demo group * n_tasks + task]
};

}  // namespace kdbirl

#pragma once

// Continuous-state stand-in environment for the featurized path. States are
// length-d real vectors on a fixed anchor set, dynamics are linear-Gaussian
// projected onto the anchors, and phi is a fixed known affine projection.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "kdbirl/demonstrations.hpp"
#include "kdbirl/errors.hpp"
#include "kdbirl/mdp.hpp"
#include "kdbirl/random.hpp"

namespace kdbirl {

struct SyntheticSpec {
  std::size_t n_states = 64;
  std::size_t state_dim = 8;
  std::size_t feature_dim = 3;
  std::size_t n_actions = 4;
  double gamma = 0.9;
  double noise = 0.6;     // transition kernel width
  double drift = 0.8;     // contraction of the linear dynamics
  std::uint64_t seed = 0; // fixes anchors, dynamics and phi

  bool operator==(const SyntheticSpec&) const = default;
};

struct SyntheticEnvironment {
  TabularMdp mdp;
  FeatureMap phi;
  std::vector<std::vector<double>> anchors;

  // Replace state indices by the raw state vectors they stand for.
  std::vector<Demonstration> to_vectors(
      const std::vector<Demonstration>& demos) const {
    std::vector<Demonstration> out;
    out.reserve(demos.size());
    for (const auto& d : demos) {
      out.emplace_back(anchors.at(d.state_index()), d.action);
    }
    return out;
  }
};

inline SyntheticEnvironment build_synthetic_environment(const SyntheticSpec& spec) {
  if (spec.n_states < 2 || spec.state_dim == 0 || spec.feature_dim == 0 ||
      spec.n_actions == 0) {
    throw ConfigError("synthetic environment dimensions must be positive");
  }
  if (!(spec.noise > 0.0)) throw ConfigError("synthetic noise must be > 0");
  const std::size_t n = spec.n_states;
  const std::size_t d = spec.state_dim;
  const std::size_t q = spec.feature_dim;
  const std::size_t na = spec.n_actions;

  Rng rng = make_rng(spec.seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<std::vector<double>> anchors(n, std::vector<double>(d));
  for (auto& x : anchors) {
    for (double& v : x) v = normal(rng);
  }
  std::vector<double> dynamics(d * d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      dynamics[i * d + j] =
          (i == j ? spec.drift : 0.0) + 0.1 * normal(rng) / std::sqrt(double(d));
    }
  }
  std::vector<double> action_offsets(na * d);
  for (double& v : action_offsets) v = 0.7 * normal(rng);

  LinearProjection projection;
  projection.input_dim = d;
  projection.output_dim = q;
  projection.matrix.resize(q * d);
  for (double& v : projection.matrix) v = normal(rng) / std::sqrt(double(d));
  projection.offsets.resize(na * q);
  for (double& v : projection.offsets) v = 0.25 * normal(rng);

  std::vector<double> table(n * na * n, 0.0);
  std::vector<double> mean(d);
  std::vector<double> logits(n);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      for (std::size_t i = 0; i < d; ++i) {
        double acc = action_offsets[a * d + i];
        for (std::size_t j = 0; j < d; ++j) {
          acc += dynamics[i * d + j] * anchors[s][j];
        }
        mean[i] = acc;
      }
      for (std::size_t t = 0; t < n; ++t) {
        double sq = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          const double diff = anchors[t][i] - mean[i];
          sq += diff * diff;
        }
        logits[t] = -sq / (2.0 * spec.noise * spec.noise);
      }
      const double lse = log_sum_exp(logits);
      double total = 0.0;
      auto* row = table.data() + (s * na + a) * n;
      for (std::size_t t = 0; t < n; ++t) {
        const double p = std::exp(logits[t] - lse);
        row[t] = p < 1e-12 ? 0.0 : p;
        total += row[t];
      }
      for (std::size_t t = 0; t < n; ++t) row[t] /= total;
    }
  }

  std::vector<double> features;
  features.reserve(n * na * q);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      const auto f = projection.apply(anchors[s], a);
      features.insert(features.end(), f.begin(), f.end());
    }
  }

  TabularMdp mdp(n, na, std::move(table), spec.gamma);
  FeatureMap phi(n, na, q, std::move(features), std::move(projection));
  return {std::move(mdp), std::move(phi), std::move(anchors)};
}

}  // namespace kdbirl

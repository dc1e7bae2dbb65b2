#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "kdbirl/errors.hpp"
#include "kdbirl/mdp.hpp"
#include "kdbirl/random.hpp"

namespace kdbirl {

// One expert (state, action) tuple. The state is either a tabular index or a
// raw continuous state vector.
struct Demonstration {
  std::variant<std::size_t, std::vector<double>> state;
  std::size_t action = 0;

  Demonstration() = default;
  Demonstration(std::size_t s, std::size_t a) : state(s), action(a) {}
  Demonstration(std::vector<double> x, std::size_t a)
      : state(std::move(x)), action(a) {}

  bool has_index() const { return std::holds_alternative<std::size_t>(state); }
  std::size_t state_index() const { return std::get<std::size_t>(state); }
  const std::vector<double>& state_vector() const {
    return std::get<std::vector<double>>(state);
  }

  bool operator==(const Demonstration&) const = default;
};

inline void check_demonstration(const Demonstration& d, std::size_t n_states,
                                std::size_t n_actions) {
  if (d.action >= n_actions) {
    throw DataError("action index " + std::to_string(d.action) +
                    " out of range");
  }
  if (d.has_index() && d.state_index() >= n_states) {
    throw DataError("state index " + std::to_string(d.state_index()) +
                    " out of range");
  }
}

using Episode = std::vector<Demonstration>;

template <class Generator>
std::size_t sample_index(std::span<const double> weights, Generator& rng) {
  std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
  return dist(rng);
}

inline std::size_t sample_action(const Policy& policy, std::size_t s,
                                 std::size_t n_actions, Rng& rng) {
  if (policy.is_deterministic()) return policy.action(s);
  std::vector<double> w(n_actions);
  for (std::size_t a = 0; a < n_actions; ++a) w[a] = policy.probability(s, a);
  return sample_index<Rng>(w, rng);
}

// Rolls out episodes until `n` tuples have been collected. Episode k draws
// from its own generator derived from (seed, k). Episodes end after
// `horizon` steps or on entering a terminal state.
inline std::vector<Episode> rollout_episodes(const TabularMdp& mdp,
                                             const Policy& policy,
                                             std::size_t n, std::size_t horizon,
                                             std::span<const double> starts,
                                             std::uint64_t seed) {
  if (n == 0) throw ConfigError("need at least one demonstration");
  if (horizon == 0) throw ConfigError("horizon must be >= 1");
  if (starts.empty()) throw ConfigError("empty start-state distribution");
  check_starts(mdp, starts);
  if (policy.n_states() != mdp.n_states()) {
    throw ConfigError("policy does not match mdp");
  }
  std::vector<Episode> episodes;
  std::size_t collected = 0;
  for (std::uint64_t k = 0; collected < n; ++k) {
    Rng rng = make_rng(seed, k);
    Episode ep;
    std::size_t s = sample_index<Rng>(starts, rng);
    for (std::size_t t = 0; t < horizon && collected < n; ++t) {
      if (mdp.is_terminal(s)) break;
      const std::size_t a = sample_action(policy, s, mdp.n_actions(), rng);
      ep.emplace_back(s, a);
      ++collected;
      const auto& succ = mdp.successors(s, a);
      if (succ.size() == 1) {
        s = succ.front().state;
      } else {
        std::vector<double> w;
        w.reserve(succ.size());
        for (const auto& x : succ) w.push_back(x.probability);
        s = succ[sample_index<Rng>(w, rng)].state;
      }
    }
    episodes.push_back(std::move(ep));
    if (k > 1000 * n) throw ConfigError("start states are all terminal");
  }
  return episodes;
}

inline std::vector<Demonstration> generate_demonstrations(
    const TabularMdp& mdp, const Policy& policy, std::size_t n,
    std::size_t horizon, std::span<const double> starts, std::uint64_t seed) {
  std::vector<Demonstration> out;
  out.reserve(n);
  for (auto& ep : rollout_episodes(mdp, policy, n, horizon, starts, seed)) {
    for (auto& d : ep) out.push_back(std::move(d));
  }
  return out;
}

}  // namespace kdbirl

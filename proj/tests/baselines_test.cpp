#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <vector>

#include "kdbirl/baselines.hpp"
#include "kdbirl/demonstrations.hpp"
#include "kdbirl/errors.hpp"
#include "kdbirl/mdp.hpp"

using namespace kdbirl;

namespace {

BirlConfig config(double alpha, PriorSpec prior = UniformPrior{{0, 0, 0, 0}, {1, 1, 1, 1}}) {
  BirlConfig c;
  c.alpha = alpha;
  c.vi_tol = 1e-12;
  c.prior = std::move(prior);
  return c;
}

TrainingSample sample(std::size_t s, std::size_t a, std::vector<double> r) {
  return {Demonstration(s, a), RewardParams::tabular(std::move(r)), 0};
}

}  // namespace

TEST(BirlLikelihood, ZeroRewardIsUniform) {
  const auto mdp = build_gridworld(2, 0.9);
  std::vector<Demonstration> demos;
  for (int i = 0; i < 13; ++i) demos.emplace_back(i % 4, i % 5);
  EXPECT_NEAR(birl_log_likelihood(demos, RewardParams::tabular({0, 0, 0, 0}), mdp, config(1.0)),
              13.0 * std::log(0.2), 1e-12);
}

TEST(BirlLikelihood, LargeAlphaGreedyDemosApproachZero) {
  const auto mdp = build_gridworld(3, 0.9);
  const auto reward = RewardParams::tabular({0, 0, 0, 0, 0, 0, 0, 0.3, 1});
  const auto pi = greedy_policy(value_iteration(mdp, reward, nullptr, 1e-12).q);
  // keep states with a unique optimal action; ties cap the likelihood at log(1/k)
  std::vector<Demonstration> demos;
  const auto q = value_iteration(mdp, reward, nullptr, 1e-12).q;
  for (std::size_t s = 0; s < 9; ++s) {
    auto row = q.row(s);
    const double best = *std::max_element(row.begin(), row.end());
    if (std::count_if(row.begin(), row.end(), [&](double v) { return v > best - 1e-9; }) == 1) {
      demos.emplace_back(s, pi.action(s));
    }
  }
  ASSERT_FALSE(demos.empty());
  double prev = -1e300;
  for (double alpha : {1.0, 10.0, 100.0, 1000.0}) {
    const double ll = birl_log_likelihood(demos, reward, mdp, config(alpha));
    EXPECT_LE(ll, 0.0);
    EXPECT_GT(ll, prev);
    prev = ll;
  }
  EXPECT_GT(prev, -1e-6);
}

TEST(BirlLikelihood, TwoByTwoClosedForm) {
  // V* = [8.1, 9, 9, 10]; Q*((0,1), .) = [8.1, 8.1, 9, 8.1, 7.29]
  const auto mdp = build_gridworld(2, 0.9);
  const std::vector<Demonstration> demo = {Demonstration(grid_state(2, 0, 1), grid_action::right)};
  const double expected =
      9.0 - std::log(3.0 * std::exp(8.1) + std::exp(9.0) + std::exp(7.29));
  EXPECT_NEAR(birl_log_likelihood(demo, RewardParams::tabular({0, 0, 0, 1}), mdp, config(1.0)),
              expected, 1e-9);
}

TEST(BirlLikelihood, PerStateTermsAreLogProbabilities) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  std::vector<double> vals(20);
  for (auto& v : vals) v = u(rng);
  const QTable q(4, 5, vals);
  for (std::size_t s = 0; s < 4; ++s) {
    double total = 0.0;
    for (std::size_t a = 0; a < 5; ++a) {
      total += std::exp(boltzmann_log_likelihood(std::vector<Demonstration>{Demonstration(s, a)},
                                                 q, 1.7));
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(BirlLikelihood, ShiftInvariantPerState) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::vector<double> vals(20);
  for (auto& v : vals) v = u(rng);
  auto shifted = vals;
  for (std::size_t s = 0; s < 4; ++s) {
    const double c = 100.0 * u(rng);
    for (std::size_t a = 0; a < 5; ++a) shifted[s * 5 + a] += c;
  }
  std::vector<Demonstration> demos;
  for (int i = 0; i < 20; ++i) demos.emplace_back(i % 4, (i * 3) % 5);
  EXPECT_NEAR(boltzmann_log_likelihood(demos, QTable(4, 5, vals), 0.8),
              boltzmann_log_likelihood(demos, QTable(4, 5, shifted), 0.8), 1e-10);
}

TEST(BirlLikelihood, ErrorsOnBadInput) {
  const auto mdp = build_gridworld(2, 0.9);
  const auto r = RewardParams::tabular({0, 0, 0, 1});
  EXPECT_THROW(birl_log_likelihood({}, r, mdp, config(1.0)), DataError);
  EXPECT_THROW(birl_log_likelihood(std::vector<Demonstration>{Demonstration(9, 0)}, r, mdp,
                                   config(1.0)),
               DataError);
  EXPECT_THROW(birl_log_likelihood(std::vector<Demonstration>{Demonstration(0, 0)}, r, mdp,
                                   config(0.0)),
               ConfigError);
}

TEST(BirlPosterior, MatchesColdLikelihoodAndCountsPlans) {
  const auto mdp = build_gridworld(3, 0.9);
  const auto cfg = config(1.0, UniformPrior{std::vector<double>(9, 0.0), std::vector<double>(9, 1.0)});
  std::vector<Demonstration> demos;
  for (int i = 0; i < 30; ++i) demos.emplace_back(i % 9, i % 5);
  const BirlPosterior target(mdp, demos, cfg);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 10; ++k) {
    std::vector<double> x(9);
    for (auto& v : x) v = u(rng);
    EXPECT_NEAR(target(x), birl_log_likelihood(demos, RewardParams::tabular(x), mdp, cfg), 1e-8);
  }
  EXPECT_EQ(target.plans(), 10u);
  std::vector<double> outside(9, 0.5);
  outside[0] = 2.0;
  EXPECT_EQ(target(outside), neg_inf);
  EXPECT_EQ(target.plans(), 10u);
}

TEST(BirlPosterior, ChainsDeterministicGivenSeed) {
  const auto mdp = build_gridworld(2, 0.9);
  std::vector<Demonstration> demos;
  for (int i = 0; i < 20; ++i) demos.emplace_back(i % 4, (i + 1) % 5);
  MhOptions o;
  o.steps = 500;
  o.proposal_sd = {0.05};
  o.seed = 31;
  const auto a = metropolis_hastings(BirlPosterior(mdp, demos, config(1.0)), {0.5, 0.5, 0.5, 0.5}, o);
  const auto b = metropolis_hastings(BirlPosterior(mdp, demos, config(1.0)), {0.5, 0.5, 0.5, 0.5}, o);
  EXPECT_EQ(a.draws, b.draws);
}

TEST(BirlPosterior, CostsMorePerStepThanCachedCkde) {
  const std::size_t g = 5;
  const auto mdp = build_gridworld(g, 0.9);
  const auto starts = uniform_starts(mdp);
  std::vector<TrainingSample> training;
  for (std::size_t corner : {std::size_t{0}, g - 1, g * (g - 1), g * g - 1}) {
    std::vector<double> r(g * g, 0.0);
    r[corner] = 1.0;
    const auto vf = value_iteration(mdp, RewardParams::tabular(r), nullptr, 1e-10);
    for (auto& d : generate_demonstrations(mdp, boltzmann_policy(vf.q, 1.0), 200, 2 * g, starts,
                                           corner + 1)) {
      training.push_back({d, RewardParams::tabular(r), static_cast<int>(corner)});
    }
  }
  std::vector<double> truth(g * g, 0.0);
  truth.back() = 1.0;
  const auto vf = value_iteration(mdp, RewardParams::tabular(truth), nullptr, 1e-10);
  const auto demos =
      generate_demonstrations(mdp, boltzmann_policy(vf.q, 1.0), 200, 2 * g, starts, 99);
  const PriorSpec prior = UniformPrior{std::vector<double>(g * g, 0.0), std::vector<double>(g * g, 1.0)};
  const auto bw = rule_of_thumb_bandwidths(training, {g * g, 5}, nullptr);
  KernelConfig kc;
  kc.h = bw.h;
  kc.h_prime = bw.h_prime;
  const KdbirlPosterior kd(CkdeLikelihood(demos, training, kc, {g * g, 5}, nullptr), prior);
  BirlConfig bc = config(1.0, prior);
  bc.vi_tol = 1e-8;
  const BirlPosterior birl(mdp, demos, bc);
  MhOptions o;
  o.steps = 300;
  o.proposal_sd = {0.05};
  o.seed = 4;
  const std::vector<double> init(g * g, 0.5);
  const auto time_chain = [&](const auto& target) {
    const auto t0 = std::chrono::steady_clock::now();
    metropolis_hastings(target, init, o);
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  const double t_kd = time_chain(kd);
  const double t_birl = time_chain(birl);
  std::cout << "per-step seconds: kdbirl " << t_kd / 300 << ", birl " << t_birl / 300
            << ", ratio " << t_birl / t_kd << "\n";
  EXPECT_GT(t_birl, t_kd);
}

TEST(InformativePrior, ConstantValuesHitFloor) {
  const std::vector<TrainingSample> t = {sample(0, 0, {0.5, 0, 0, 0}), sample(1, 2, {0, 0.5, 0, 0}),
                                         sample(3, 1, {0, 0, 0, 0.5})};
  const auto p = informative_prior_from_training(t, {4, 5});
  EXPECT_EQ(p.mean, std::vector<double>(4, 0.5));
  EXPECT_EQ(p.sd, std::vector<double>(4, informative_sd_floor));
}

TEST(InformativePrior, BernoulliMoments) {
  // R_j(s_j) = 1, 0, 1, 0
  const std::vector<TrainingSample> t = {sample(0, 0, {1, 0, 0, 0}), sample(1, 0, {1, 0, 0, 0}),
                                         sample(2, 0, {0, 0, 1, 0}), sample(3, 0, {0, 0, 1, 0})};
  const auto p = informative_prior_from_training(t, {4, 5});
  EXPECT_NEAR(p.mean[0], 0.5, 1e-15);
  EXPECT_NEAR(p.sd[0] * p.sd[0], 0.25, 1e-15);
}

TEST(InformativePrior, OrderInvariant) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<TrainingSample> t;
  for (int j = 0; j < 200; ++j) {
    t.push_back(sample(j % 4, j % 5, {u(rng), u(rng), u(rng), u(rng)}));
  }
  const auto base = informative_prior_from_training(t, {4, 5});
  for (int k = 0; k < 5; ++k) {
    std::shuffle(t.begin(), t.end(), rng);
    EXPECT_EQ(informative_prior_from_training(t, {4, 5}), base);
  }
}

TEST(InformativePrior, FeaturizedUsesWeightDotFeatures) {
  const auto phi = coordinate_feature_map(3);
  const std::vector<TrainingSample> t = {
      {Demonstration(grid_state(3, 2, 1), 0), RewardParams::featurized({1, 0}), 0},
      {Demonstration(grid_state(3, 0, 2), 0), RewardParams::featurized({0, 1}), 1}};
  const auto p = informative_prior_from_training(t, {9, 5}, &phi);
  EXPECT_NEAR(p.mean[0], 2.0, 1e-15);
  EXPECT_EQ(p.mean.size(), 2u);
}

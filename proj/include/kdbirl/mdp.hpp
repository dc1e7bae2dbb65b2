#pragma once

// Tabular MDPs, reward parameterizations and exact planning.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "kdbirl/errors.hpp"

namespace kdbirl {

// Gridworld action set, in index order.
namespace grid_action {
inline constexpr std::size_t no_action = 0;
inline constexpr std::size_t up = 1;
inline constexpr std::size_t right = 2;
inline constexpr std::size_t left = 3;
inline constexpr std::size_t down = 4;
inline constexpr std::size_t count = 5;
}  // namespace grid_action

struct Successor {
  std::size_t state;
  double probability;
};

class TabularMdp {
 public:
  static constexpr double row_tolerance = 1e-9;

  // `transition` is indexed [(state * n_actions + action) * n_states + next].
  TabularMdp(std::size_t n_states, std::size_t n_actions,
             std::vector<double> transition, double gamma,
             std::set<std::size_t> terminals = {},
             std::optional<std::size_t> grid_size = std::nullopt)
      : n_states_(n_states),
        n_actions_(n_actions),
        transition_(std::move(transition)),
        gamma_(gamma),
        terminals_(std::move(terminals)),
        grid_size_(grid_size) {
    if (n_states_ == 0 || n_actions_ == 0) {
      throw ConfigError("mdp needs at least one state and one action");
    }
    if (!(gamma_ >= 0.0 && gamma_ < 1.0)) {
      throw ConfigError("discount must lie in [0, 1), got " +
                        std::to_string(gamma_));
    }
    if (transition_.size() != n_states_ * n_actions_ * n_states_) {
      throw ConfigError("transition table has wrong size");
    }
    if (grid_size_ && *grid_size_ * *grid_size_ != n_states_) {
      throw ConfigError("grid_size^2 does not match n_states");
    }
    for (std::size_t t : terminals_) {
      if (t >= n_states_) {
        throw ConfigError("terminal state index " + std::to_string(t) +
                          " out of range");
      }
      for (std::size_t a = 0; a < n_actions_; ++a) {
        auto p = row_mut(t, a);
        std::fill(p.begin(), p.end(), 0.0);
        p[t] = 1.0;
      }
    }
    successors_.resize(n_states_ * n_actions_);
    for (std::size_t s = 0; s < n_states_; ++s) {
      for (std::size_t a = 0; a < n_actions_; ++a) {
        auto p = row(s, a);
        double total = 0.0;
        for (std::size_t next = 0; next < n_states_; ++next) {
          if (!(p[next] >= 0.0) || !std::isfinite(p[next])) {
            throw ConfigError("transition probabilities must be finite and >= 0");
          }
          total += p[next];
          if (p[next] > 0.0) {
            successors_[s * n_actions_ + a].push_back({next, p[next]});
          }
        }
        if (std::abs(total - 1.0) > row_tolerance) {
          throw ConfigError("transition row (" + std::to_string(s) + ", " +
                            std::to_string(a) + ") sums to " +
                            std::to_string(total));
        }
      }
    }
  }

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  double gamma() const { return gamma_; }
  const std::set<std::size_t>& terminals() const { return terminals_; }
  std::optional<std::size_t> grid_size() const { return grid_size_; }
  bool is_terminal(std::size_t s) const { return terminals_.contains(s); }

  std::span<const double> row(std::size_t s, std::size_t a) const {
    return {transition_.data() + (s * n_actions_ + a) * n_states_, n_states_};
  }
  double probability(std::size_t s, std::size_t a, std::size_t next) const {
    return row(s, a)[next];
  }
  const std::vector<Successor>& successors(std::size_t s, std::size_t a) const {
    return successors_[s * n_actions_ + a];
  }

 private:
  std::span<double> row_mut(std::size_t s, std::size_t a) {
    return {transition_.data() + (s * n_actions_ + a) * n_states_, n_states_};
  }

  std::size_t n_states_;
  std::size_t n_actions_;
  std::vector<double> transition_;
  double gamma_;
  std::set<std::size_t> terminals_;
  std::optional<std::size_t> grid_size_;
  std::vector<std::vector<Successor>> successors_;
};

// Grid cells are addressed (x, y) with x to the right and y upwards;
// state index = y * g + x.
inline std::size_t grid_state(std::size_t g, std::size_t x, std::size_t y) {
  return y * g + x;
}
inline std::pair<std::size_t, std::size_t> grid_cell(std::size_t g,
                                                     std::size_t s) {
  return {s % g, s / g};
}

// Deterministic g x g gridworld; off-grid moves leave the agent in place.
inline TabularMdp build_gridworld(std::size_t g, double gamma,
                                  const std::vector<std::size_t>& terminal = {}) {
  if (g < 2) throw ConfigError("grid side must be >= 2");
  const std::size_t n = g * g;
  const std::size_t na = grid_action::count;
  std::vector<double> table(n * na * n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    auto [x, y] = grid_cell(g, s);
    for (std::size_t a = 0; a < na; ++a) {
      std::size_t nx = x;
      std::size_t ny = y;
      switch (a) {
        case grid_action::up:
          if (y + 1 < g) ++ny;
          break;
        case grid_action::right:
          if (x + 1 < g) ++nx;
          break;
        case grid_action::left:
          if (x > 0) --nx;
          break;
        case grid_action::down:
          if (y > 0) --ny;
          break;
        default:
          break;
      }
      table[(s * na + a) * n + grid_state(g, nx, ny)] = 1.0;
    }
  }
  std::set<std::size_t> terminals;
  for (std::size_t t : terminal) {
    if (t >= n) {
      throw ConfigError("terminal state " + std::to_string(t) +
                        " outside a " + std::to_string(g) + "x" +
                        std::to_string(g) + " grid");
    }
    terminals.insert(t);
  }
  return TabularMdp(n, na, std::move(table), gamma, std::move(terminals), g);
}

// Affine map from a raw continuous state vector to features:
// phi(x, a) = matrix * x + offset[a]. Used when demonstrations carry raw
// state vectors rather than state indices.
struct LinearProjection {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::vector<double> matrix;   // output_dim x input_dim, row-major
  std::vector<double> offsets;  // n_actions x output_dim

  std::vector<double> apply(std::span<const double> x, std::size_t action) const {
    if (x.size() != input_dim) {
      throw ConfigError("state vector has length " + std::to_string(x.size()) +
                        ", projection expects " + std::to_string(input_dim));
    }
    if ((action + 1) * output_dim > offsets.size()) {
      throw ConfigError("action out of range for feature projection");
    }
    std::vector<double> out(output_dim);
    for (std::size_t i = 0; i < output_dim; ++i) {
      double acc = offsets[action * output_dim + i];
      for (std::size_t j = 0; j < input_dim; ++j) {
        acc += matrix[i * input_dim + j] * x[j];
      }
      out[i] = acc;
    }
    return out;
  }
};

class FeatureMap {
 public:
  FeatureMap(std::size_t n_states, std::size_t n_actions, std::size_t q,
             std::vector<double> table,
             std::optional<LinearProjection> projection = std::nullopt)
      : n_states_(n_states),
        n_actions_(n_actions),
        q_(q),
        table_(std::move(table)),
        projection_(std::move(projection)) {
    if (q_ == 0) throw ConfigError("feature dimension must be positive");
    if (table_.size() != n_states_ * n_actions_ * q_) {
      throw ConfigError("feature table must cover every (state, action) pair");
    }
    if (projection_ && projection_->output_dim != q_) {
      throw ConfigError("projection output dimension differs from q");
    }
  }

  std::size_t q() const { return q_; }
  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }

  std::span<const double> operator()(std::size_t s, std::size_t a) const {
    if (s >= n_states_ || a >= n_actions_) {
      throw ConfigError("feature lookup out of range");
    }
    return {table_.data() + (s * n_actions_ + a) * q_, q_};
  }

  const std::optional<LinearProjection>& projection() const {
    return projection_;
  }

 private:
  std::size_t n_states_;
  std::size_t n_actions_;
  std::size_t q_;
  std::vector<double> table_;
  std::optional<LinearProjection> projection_;
};

// phi(s, a) = [x, y], independent of the action.
inline FeatureMap coordinate_feature_map(std::size_t g) {
  if (g < 2) throw ConfigError("grid side must be >= 2");
  const std::size_t n = g * g;
  std::vector<double> table;
  table.reserve(n * grid_action::count * 2);
  for (std::size_t s = 0; s < n; ++s) {
    auto [x, y] = grid_cell(g, s);
    for (std::size_t a = 0; a < grid_action::count; ++a) {
      table.push_back(static_cast<double>(x));
      table.push_back(static_cast<double>(y));
    }
  }
  return FeatureMap(n, grid_action::count, 2, std::move(table));
}

struct Interval {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  bool contains(double v) const { return v >= lower && v <= upper; }
  bool operator==(const Interval&) const = default;
};

enum class RewardKind { tabular, featurized };

inline const char* to_string(RewardKind kind) {
  return kind == RewardKind::tabular ? "tabular" : "featurized";
}

// Either a per-state reward vector or a feature-weight vector.
class RewardParams {
 public:
  RewardParams() = default;
  RewardParams(RewardKind kind, std::vector<double> values,
               std::vector<Interval> bounds = {})
      : kind_(kind), values_(std::move(values)), bounds_(std::move(bounds)) {
    if (!bounds_.empty() && bounds_.size() != values_.size()) {
      throw ConfigError("reward bounds and values differ in length");
    }
    if (!in_bounds()) throw ConfigError("reward parameters outside bounds");
  }

  static RewardParams tabular(std::vector<double> values,
                              std::vector<Interval> bounds = {}) {
    return {RewardKind::tabular, std::move(values), std::move(bounds)};
  }
  static RewardParams featurized(std::vector<double> weights,
                                 std::vector<Interval> bounds = {}) {
    return {RewardKind::featurized, std::move(weights), std::move(bounds)};
  }

  RewardKind kind() const { return kind_; }
  std::size_t dim() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }
  const std::vector<Interval>& bounds() const { return bounds_; }
  double operator[](std::size_t i) const { return values_[i]; }

  bool in_bounds() const {
    for (std::size_t i = 0; i < bounds_.size(); ++i) {
      if (!bounds_[i].contains(values_[i])) return false;
    }
    return true;
  }

  bool operator==(const RewardParams&) const = default;

 private:
  RewardKind kind_ = RewardKind::tabular;
  std::vector<double> values_;
  std::vector<Interval> bounds_;
};

// Dense r(s, a) table, indexed [s * n_actions + a].
inline std::vector<double> reward_table(const TabularMdp& mdp,
                                        const RewardParams& reward,
                                        const FeatureMap* phi) {
  const std::size_t ns = mdp.n_states();
  const std::size_t na = mdp.n_actions();
  std::vector<double> r(ns * na);
  if (reward.kind() == RewardKind::tabular) {
    if (reward.dim() != ns) {
      throw ConfigError("tabular reward has length " +
                        std::to_string(reward.dim()) + ", mdp has " +
                        std::to_string(ns) + " states");
    }
    for (std::size_t s = 0; s < ns; ++s) {
      for (std::size_t a = 0; a < na; ++a) r[s * na + a] = reward[s];
    }
    return r;
  }
  if (phi == nullptr) {
    throw ConfigError("featurized reward requires a feature map");
  }
  if (phi->n_states() != ns || phi->n_actions() != na) {
    throw ConfigError("feature map does not match the mdp");
  }
  if (reward.dim() != phi->q()) {
    throw ConfigError("weight vector has length " +
                      std::to_string(reward.dim()) + ", feature map has q=" +
                      std::to_string(phi->q()));
  }
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      auto f = (*phi)(s, a);
      r[s * na + a] =
          std::inner_product(f.begin(), f.end(), reward.values().begin(), 0.0);
    }
  }
  return r;
}

class QTable {
 public:
  QTable() = default;
  QTable(std::size_t n_states, std::size_t n_actions,
         std::vector<double> values)
      : n_states_(n_states), n_actions_(n_actions), values_(std::move(values)) {
    if (values_.size() != n_states_ * n_actions_) {
      throw ConfigError("Q table has wrong size");
    }
  }
  QTable(std::size_t n_states, std::size_t n_actions)
      : QTable(n_states, n_actions,
               std::vector<double>(n_states * n_actions, 0.0)) {}

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  double operator()(std::size_t s, std::size_t a) const {
    return values_[s * n_actions_ + a];
  }
  double& operator()(std::size_t s, std::size_t a) {
    return values_[s * n_actions_ + a];
  }
  std::span<const double> row(std::size_t s) const {
    return {values_.data() + s * n_actions_, n_actions_};
  }
  const std::vector<double>& values() const { return values_; }

 private:
  std::size_t n_states_ = 0;
  std::size_t n_actions_ = 0;
  std::vector<double> values_;
};

struct ValueFunction {
  std::vector<double> v;
  QTable q;
  double residual = 0.0;  // sup-norm Bellman residual of v
  std::size_t iterations = 0;
};

inline double bellman_backup(const TabularMdp& mdp, std::span<const double> r,
                             std::span<const double> v, std::size_t s,
                             std::size_t a) {
  double acc = 0.0;
  for (const auto& succ : mdp.successors(s, a)) {
    acc += succ.probability * v[succ.state];
  }
  return r[s * mdp.n_actions() + a] + mdp.gamma() * acc;
}

// sup_s |max_a (r + gamma P v)(s, a) - v(s)|
inline double bellman_residual(const TabularMdp& mdp, std::span<const double> r,
                               std::span<const double> v) {
  double worst = 0.0;
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      best = std::max(best, bellman_backup(mdp, r, v, s, a));
    }
    worst = std::max(worst, std::abs(best - v[s]));
  }
  return worst;
}

// Value iteration on a precomputed r(s, a) table. `warm_start`, when given,
// seeds the iteration; the fixed point is unchanged.
inline ValueFunction value_iteration_table(
    const TabularMdp& mdp, std::span<const double> r, double tol,
    std::span<const double> warm_start = {},
    std::size_t max_iterations = 1'000'000) {
  if (!(tol > 0.0)) throw ConfigError("value iteration tolerance must be > 0");
  const std::size_t ns = mdp.n_states();
  const std::size_t na = mdp.n_actions();
  if (r.size() != ns * na) throw ConfigError("reward table has wrong size");
  for (double x : r) {
    if (!std::isfinite(x)) throw NumericalError("non-finite reward value");
  }
  std::vector<double> v(ns, 0.0);
  if (!warm_start.empty()) {
    if (warm_start.size() != ns) throw ConfigError("warm start has wrong size");
    std::copy(warm_start.begin(), warm_start.end(), v.begin());
  }
  std::vector<double> next(ns);
  std::size_t it = 0;
  // Stop once successive iterates differ by < tol; the residual of the
  // returned iterate is then at most gamma * tol.
  while (true) {
    double delta = 0.0;
    for (std::size_t s = 0; s < ns; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < na; ++a) {
        best = std::max(best, bellman_backup(mdp, r, v, s, a));
      }
      next[s] = best;
      delta = std::max(delta, std::abs(best - v[s]));
    }
    v.swap(next);
    ++it;
    if (delta < tol) break;
    if (it >= max_iterations) {
      throw NumericalError("value iteration did not converge");
    }
  }
  QTable q(ns, na);
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t a = 0; a < na; ++a) q(s, a) = bellman_backup(mdp, r, v, s, a);
  }
  ValueFunction out;
  out.residual = bellman_residual(mdp, r, v);
  out.v = std::move(v);
  out.q = std::move(q);
  out.iterations = it;
  return out;
}

inline ValueFunction value_iteration(const TabularMdp& mdp,
                                     const RewardParams& reward,
                                     const FeatureMap* phi, double tol) {
  const auto r = reward_table(mdp, reward, phi);
  return value_iteration_table(mdp, r, tol);
}

struct DeterministicPolicy {
  std::vector<std::size_t> actions;
};

struct StochasticPolicy {
  std::size_t n_actions = 0;
  std::vector<double> probabilities;  // [s * n_actions + a]
};

class Policy {
 public:
  static constexpr double row_tolerance = 1e-9;

  explicit Policy(DeterministicPolicy p) : impl_(std::move(p)) {}
  explicit Policy(StochasticPolicy p) : impl_(std::move(p)) {
    const auto& sp = std::get<StochasticPolicy>(impl_);
    if (sp.n_actions == 0 || sp.probabilities.size() % sp.n_actions != 0) {
      throw ConfigError("stochastic policy table has wrong shape");
    }
    for (std::size_t s = 0; s < sp.probabilities.size() / sp.n_actions; ++s) {
      double total = 0.0;
      for (std::size_t a = 0; a < sp.n_actions; ++a) {
        total += sp.probabilities[s * sp.n_actions + a];
      }
      if (std::abs(total - 1.0) > row_tolerance) {
        throw ConfigError("policy row " + std::to_string(s) +
                          " does not sum to 1");
      }
    }
  }

  bool is_deterministic() const {
    return std::holds_alternative<DeterministicPolicy>(impl_);
  }
  std::size_t n_states() const {
    if (auto* d = std::get_if<DeterministicPolicy>(&impl_)) {
      return d->actions.size();
    }
    const auto& sp = std::get<StochasticPolicy>(impl_);
    return sp.probabilities.size() / sp.n_actions;
  }

  // Deterministic policies only.
  std::size_t action(std::size_t s) const {
    return std::get<DeterministicPolicy>(impl_).actions.at(s);
  }
  double probability(std::size_t s, std::size_t a) const {
    if (auto* d = std::get_if<DeterministicPolicy>(&impl_)) {
      return d->actions.at(s) == a ? 1.0 : 0.0;
    }
    const auto& sp = std::get<StochasticPolicy>(impl_);
    return sp.probabilities.at(s * sp.n_actions + a);
  }

  const std::variant<DeterministicPolicy, StochasticPolicy>& get() const {
    return impl_;
  }

  bool operator==(const Policy& other) const {
    if (is_deterministic() != other.is_deterministic()) return false;
    if (is_deterministic()) {
      return std::get<DeterministicPolicy>(impl_).actions ==
             std::get<DeterministicPolicy>(other.impl_).actions;
    }
    const auto& a = std::get<StochasticPolicy>(impl_);
    const auto& b = std::get<StochasticPolicy>(other.impl_);
    return a.n_actions == b.n_actions && a.probabilities == b.probabilities;
  }

 private:
  std::variant<DeterministicPolicy, StochasticPolicy> impl_;
};

// Q values closer than this (relative to the row's magnitude) count as tied.
inline constexpr double greedy_tie_tolerance = 1e-9;

inline std::size_t greedy_action(std::span<const double> row) {
  double scale = 1.0;
  for (double x : row) scale = std::max(scale, std::abs(x));
  const double best = *std::max_element(row.begin(), row.end());
  for (std::size_t a = 0; a < row.size(); ++a) {
    if (row[a] >= best - greedy_tie_tolerance * scale) return a;
  }
  return 0;
}

// argmax_a Q(s, a); ties go to the lowest action index.
inline Policy greedy_policy(const QTable& q) {
  DeterministicPolicy p;
  p.actions.resize(q.n_states());
  for (std::size_t s = 0; s < q.n_states(); ++s) {
    p.actions[s] = greedy_action(q.row(s));
  }
  return Policy(std::move(p));
}

inline double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - m);
  return m + std::log(acc);
}

// log pi(a | s) = alpha Q(s, a) - logsumexp_a' alpha Q(s, a')
inline std::vector<double> boltzmann_log_probabilities(std::span<const double> q_row,
                                                       double alpha) {
  std::vector<double> z(q_row.size());
  for (std::size_t a = 0; a < q_row.size(); ++a) z[a] = alpha * q_row[a];
  const double lse = log_sum_exp(z);
  for (double& x : z) x -= lse;
  return z;
}

inline Policy boltzmann_policy(const QTable& q, double alpha) {
  if (!(alpha > 0.0)) throw ConfigError("inverse temperature must be > 0");
  StochasticPolicy p;
  p.n_actions = q.n_actions();
  p.probabilities.resize(q.n_states() * q.n_actions());
  for (std::size_t s = 0; s < q.n_states(); ++s) {
    const auto logp = boltzmann_log_probabilities(q.row(s), alpha);
    double total = 0.0;
    for (std::size_t a = 0; a < q.n_actions(); ++a) {
      total += std::exp(logp[a]);
    }
    for (std::size_t a = 0; a < q.n_actions(); ++a) {
      p.probabilities[s * q.n_actions() + a] = std::exp(logp[a]) / total;
    }
  }
  return Policy(std::move(p));
}

// Start-state distribution; uniform over non-terminal states by default.
inline std::vector<double> uniform_starts(const TabularMdp& mdp) {
  std::vector<double> starts(mdp.n_states(), 0.0);
  std::size_t count = 0;
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    if (!mdp.is_terminal(s)) ++count;
  }
  if (count == 0) throw ConfigError("every state is terminal");
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    if (!mdp.is_terminal(s)) starts[s] = 1.0 / static_cast<double>(count);
  }
  return starts;
}

inline void check_starts(const TabularMdp& mdp, std::span<const double> starts) {
  if (starts.size() != mdp.n_states()) {
    throw ConfigError("start distribution has wrong length");
  }
  double total = 0.0;
  for (double p : starts) {
    if (!(p >= 0.0)) throw ConfigError("negative start probability");
    total += p;
  }
  if (!(total > 0.0)) throw ConfigError("start distribution is empty");
}

// V^pi by solving (I - gamma P_pi) V = r_pi directly.
inline std::vector<double> policy_state_values(const TabularMdp& mdp,
                                               const Policy& policy,
                                               std::span<const double> r) {
  const std::size_t ns = mdp.n_states();
  const std::size_t na = mdp.n_actions();
  if (policy.n_states() != ns) throw ConfigError("policy does not match mdp");
  if (r.size() != ns * na) throw ConfigError("reward table has wrong size");
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(
      static_cast<Eigen::Index>(ns), static_cast<Eigen::Index>(ns));
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ns));
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      const double pa = policy.probability(s, a);
      if (pa == 0.0) continue;
      rhs[static_cast<Eigen::Index>(s)] += pa * r[s * na + a];
      for (const auto& succ : mdp.successors(s, a)) {
        system(static_cast<Eigen::Index>(s),
               static_cast<Eigen::Index>(succ.state)) -=
            mdp.gamma() * pa * succ.probability;
      }
    }
  }
  const Eigen::VectorXd v = system.partialPivLu().solve(rhs);
  std::vector<double> out(v.data(), v.data() + v.size());
  for (double x : out) {
    if (!std::isfinite(x)) throw NumericalError("policy evaluation diverged");
  }
  return out;
}

// E_{s ~ starts}[V^{pi, R}(s)]
inline double policy_value(const TabularMdp& mdp, const Policy& policy,
                           const RewardParams& reward, const FeatureMap* phi,
                           std::span<const double> starts) {
  check_starts(mdp, starts);
  const auto r = reward_table(mdp, reward, phi);
  const auto v = policy_state_values(mdp, policy, r);
  double total = std::accumulate(starts.begin(), starts.end(), 0.0);
  double acc = 0.0;
  for (std::size_t s = 0; s < v.size(); ++s) acc += starts[s] * v[s];
  return acc / total;
}

}  // namespace kdbirl

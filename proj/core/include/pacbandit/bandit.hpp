#pragma once

#include <Eigen/Dense>

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pacbandit/rng.hpp"

namespace pacbandit {

using Context = std::size_t;
using Action = std::size_t;

struct NoiseModel {
  enum class Kind { Bernoulli, GaussianClipped };

  Kind kind = Kind::Bernoulli;
  double sigma = 0.0;

  static NoiseModel bernoulli() { return {}; }
  static NoiseModel gaussian_clipped(double sigma);
};

std::string to_string(NoiseModel::Kind kind);

// Finite contextual bandit: context law nu over [0, |C|), mean rewards
// r(c, a) in [0, 1] stored row-major, and a reward noise model.
class BanditInstance {
 public:
  BanditInstance(std::vector<double> nu, std::size_t num_actions,
                 std::vector<double> mean_reward,
                 NoiseModel noise = NoiseModel::bernoulli(),
                 std::uint64_t rng_seed = 0);

  std::size_t num_contexts() const { return nu_.size(); }
  std::size_t num_actions() const { return num_actions_; }
  double nu(Context c) const { return nu_[c]; }
  const std::vector<double>& nu() const { return nu_; }
  double reward(Context c, Action a) const { return reward_[c * num_actions_ + a]; }
  const std::vector<double>& reward_table() const { return reward_; }
  const NoiseModel& noise() const { return noise_; }
  std::uint64_t rng_seed() const { return rng_seed_; }

  Context sample_context(Rng& rng) const;
  double sample_reward(Context c, Action a, Rng& rng) const;

 private:
  std::vector<double> nu_;
  std::size_t num_actions_;
  std::vector<double> reward_;
  NoiseModel noise_;
  std::uint64_t rng_seed_;
  std::vector<double> nu_cdf_;
};

// Deterministic policy stored as a dense action array over contexts.
class Policy {
 public:
  Policy() = default;
  explicit Policy(std::vector<Action> action_of) : action_of_(std::move(action_of)) {}

  Action operator()(Context c) const { return action_of_[c]; }
  const std::vector<Action>& actions() const { return action_of_; }
  std::size_t num_contexts() const { return action_of_.size(); }

  friend auto operator<=>(const Policy&, const Policy&) = default;
  friend bool operator==(const Policy&, const Policy&) = default;

 private:
  std::vector<Action> action_of_;
};

// Dense feature table with one row per (c, a), row index c * |A| + a.
class FeatureMap {
 public:
  FeatureMap(std::size_t num_contexts, std::size_t num_actions, Eigen::MatrixXd rows);

  std::size_t dim() const { return static_cast<std::size_t>(rows_.cols()); }
  std::size_t num_contexts() const { return num_contexts_; }
  std::size_t num_actions() const { return num_actions_; }
  Eigen::VectorXd operator()(Context c, Action a) const {
    return rows_.row(static_cast<Eigen::Index>(c * num_actions_ + a)).transpose();
  }
  const Eigen::MatrixXd& rows() const { return rows_; }
  bool is_one_hot() const { return one_hot_; }

 private:
  std::size_t num_contexts_;
  std::size_t num_actions_;
  Eigen::MatrixXd rows_;
  bool one_hot_;
};

// Finite policy class. Duplicate action maps are dropped on construction;
// the first occurrence keeps its position.
class PolicyClass {
 public:
  PolicyClass(std::size_t num_contexts, std::size_t num_actions,
              std::vector<Policy> policies,
              std::optional<FeatureMap> feature_map = std::nullopt,
              std::optional<Eigen::VectorXd> theta_star = std::nullopt);

  std::size_t size() const { return policies_.size(); }
  const Policy& operator[](std::size_t i) const { return policies_[i]; }
  const std::vector<Policy>& policies() const { return policies_; }
  std::size_t num_contexts() const { return num_contexts_; }
  std::size_t num_actions() const { return num_actions_; }
  const std::optional<FeatureMap>& feature_map() const { return feature_map_; }
  const std::optional<Eigen::VectorXd>& theta_star() const { return theta_star_; }
  std::optional<std::size_t> index_of(const Policy& policy) const;

  PolicyClass subset(const std::vector<std::size_t>& indices) const;

 private:
  std::size_t num_contexts_;
  std::size_t num_actions_;
  std::vector<Policy> policies_;
  std::optional<FeatureMap> feature_map_;
  std::optional<Eigen::VectorXd> theta_star_;
};

struct Problem {
  BanditInstance instance;
  PolicyClass policies;
};

// Per-context action distributions p_c; w(c, a) = nu_c * p_{c,a}.
class Allocation {
 public:
  explicit Allocation(Eigen::MatrixXd rows);

  static Allocation uniform(std::size_t num_contexts, std::size_t num_actions);
  static Allocation from_policy(const Policy& policy, std::size_t num_actions);

  std::size_t num_contexts() const { return static_cast<std::size_t>(rows_.rows()); }
  std::size_t num_actions() const { return static_cast<std::size_t>(rows_.cols()); }
  double operator()(Context c, Action a) const {
    return rows_(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(a));
  }
  const Eigen::MatrixXd& rows() const { return rows_; }
  double weight(const BanditInstance& instance, Context c, Action a) const {
    return instance.nu(c) * (*this)(c, a);
  }

 private:
  Eigen::MatrixXd rows_;
};

struct Interaction {
  Context context;
  Action action;
  double reward;
  double propensity;
};

// Checks that theta_star reproduces the reward table through the features.
void validate_realizable(const BanditInstance& instance, const PolicyClass& policies,
                         double tol = 1e-9);

Problem make_hard_instance(std::size_t m, double gap,
                           NoiseModel noise = NoiseModel::bernoulli());

PolicyClass make_trivial_class(const BanditInstance& instance,
                               std::size_t cap = 1'000'000);

FeatureMap one_hot_feature_map(const BanditInstance& instance);
Eigen::VectorXd one_hot_theta(const BanditInstance& instance);

// Returns `policies` with one-hot features and the matching theta_star.
PolicyClass with_one_hot_features(const BanditInstance& instance,
                                  const PolicyClass& policies);

// Features of `policies`, or the one-hot map when none is attached.
FeatureMap features_or_one_hot(const BanditInstance& instance,
                               const PolicyClass& policies);

Eigen::VectorXd policy_embedding(const BanditInstance& instance,
                                 const FeatureMap& features, const Policy& policy);
std::vector<Eigen::VectorXd> policy_embeddings(const BanditInstance& instance,
                                               const FeatureMap& features,
                                               const PolicyClass& policies);

double policy_value(const BanditInstance& instance, const Policy& policy);
std::vector<double> policy_values(const BanditInstance& instance,
                                  const PolicyClass& policies);

// Index of the unique best policy; values within `tol` of the best are ties
// and raise an ambiguous-optimum error.
std::size_t optimal_policy(const BanditInstance& instance, const PolicyClass& policies,
                           double tol = 1e-9);

inline int disagreement(const Policy& pi, const Policy& pivot, Context c, Action a) {
  const bool in_pi = pi(c) == a;
  const bool in_pivot = pivot(c) == a;
  return in_pi != in_pivot ? 1 : 0;
}

std::vector<int> disagreement_vector(const PolicyClass& policies, Context c, Action a,
                                     const Policy& pivot);

Interaction sample_interaction(const BanditInstance& instance,
                               const Allocation& allocation, Rng& rng);
Interaction sample_interaction(const BanditInstance& instance, const Policy& policy,
                               Rng& rng);

// Random instance with Dirichlet(1) context weights and uniform rewards.
BanditInstance make_random_instance(std::size_t num_contexts, std::size_t num_actions,
                                    Rng& rng, NoiseModel noise = NoiseModel::bernoulli());

// `count` distinct uniformly random policies (count is capped at |A|^|C|).
PolicyClass make_random_class(std::size_t num_contexts, std::size_t num_actions,
                              std::size_t count, Rng& rng);

std::string instance_to_json(const BanditInstance& instance);
BanditInstance instance_from_json(std::string_view text);
std::string policy_class_to_json(const PolicyClass& policies);
PolicyClass policy_class_from_json(std::string_view text);

}  // namespace pacbandit

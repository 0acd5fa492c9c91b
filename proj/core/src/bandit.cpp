#include "pacbandit/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "json.hpp"

#include "pacbandit/error.hpp"

namespace pacbandit {

using nlohmann::json;

NoiseModel NoiseModel::gaussian_clipped(double sigma) {
  require(sigma > 0.0 && std::isfinite(sigma), ErrorKind::InvalidArgument,
          "gaussian noise sigma must be positive");
  return {Kind::GaussianClipped, sigma};
}

std::string to_string(NoiseModel::Kind kind) {
  return kind == NoiseModel::Kind::Bernoulli ? "bernoulli" : "gaussian_clipped";
}

BanditInstance::BanditInstance(std::vector<double> nu, std::size_t num_actions,
                               std::vector<double> mean_reward, NoiseModel noise,
                               std::uint64_t rng_seed)
    : nu_(std::move(nu)),
      num_actions_(num_actions),
      reward_(std::move(mean_reward)),
      noise_(noise),
      rng_seed_(rng_seed) {
  require(!nu_.empty(), ErrorKind::InvalidArgument, "instance needs at least one context");
  require(num_actions_ >= 1, ErrorKind::InvalidArgument, "instance needs at least one action");
  require(reward_.size() == nu_.size() * num_actions_, ErrorKind::InvalidArgument,
          "reward table must have |C|*|A| entries");
  double total = 0.0;
  for (double v : nu_) {
    require(v >= 0.0 && std::isfinite(v), ErrorKind::InvalidArgument,
            "context weights must be nonnegative");
    total += v;
  }
  require(std::abs(total - 1.0) <= 1e-12, ErrorKind::InvalidArgument,
          "context weights must sum to 1");
  for (double r : reward_) {
    require(r >= 0.0 && r <= 1.0, ErrorKind::InvalidArgument, "mean rewards must lie in [0,1]");
  }
  if (noise_.kind == NoiseModel::Kind::GaussianClipped) {
    require(noise_.sigma > 0.0, ErrorKind::InvalidArgument, "gaussian noise sigma must be positive");
  }
  nu_cdf_.resize(nu_.size());
  std::partial_sum(nu_.begin(), nu_.end(), nu_cdf_.begin());
}

Context BanditInstance::sample_context(Rng& rng) const {
  const double u = uniform01(rng) * nu_cdf_.back();
  auto it = std::upper_bound(nu_cdf_.begin(), nu_cdf_.end(), u);
  auto c = static_cast<std::size_t>(it - nu_cdf_.begin());
  c = std::min(c, nu_.size() - 1);
  while (nu_[c] == 0.0 && c > 0) --c;
  return c;
}

double BanditInstance::sample_reward(Context c, Action a, Rng& rng) const {
  const double mean = reward(c, a);
  if (noise_.kind == NoiseModel::Kind::Bernoulli) {
    return uniform01(rng) < mean ? 1.0 : 0.0;
  }
  return std::clamp(mean + noise_.sigma * standard_normal(rng), 0.0, 1.0);
}

FeatureMap::FeatureMap(std::size_t num_contexts, std::size_t num_actions, Eigen::MatrixXd rows)
    : num_contexts_(num_contexts), num_actions_(num_actions), rows_(std::move(rows)) {
  require(static_cast<std::size_t>(rows_.rows()) == num_contexts_ * num_actions_,
          ErrorKind::InvalidArgument, "feature table must have |C|*|A| rows");
  require(rows_.cols() >= 1, ErrorKind::InvalidArgument, "feature dimension must be positive");
  one_hot_ = rows_.rows() == rows_.cols() && rows_.isIdentity(0.0);
}

PolicyClass::PolicyClass(std::size_t num_contexts, std::size_t num_actions,
                         std::vector<Policy> policies, std::optional<FeatureMap> feature_map,
                         std::optional<Eigen::VectorXd> theta_star)
    : num_contexts_(num_contexts),
      num_actions_(num_actions),
      feature_map_(std::move(feature_map)),
      theta_star_(std::move(theta_star)) {
  std::set<Policy> seen;
  for (auto& p : policies) {
    require(p.num_contexts() == num_contexts_, ErrorKind::InvalidArgument,
            "policy must be total over the contexts");
    for (Action a : p.actions()) {
      require(a < num_actions_, ErrorKind::InvalidArgument, "policy action out of range");
    }
    if (seen.insert(p).second) policies_.push_back(std::move(p));
  }
  if (feature_map_) {
    require(feature_map_->num_contexts() == num_contexts_ &&
                feature_map_->num_actions() == num_actions_,
            ErrorKind::InvalidArgument, "feature map shape does not match the class");
  }
  if (theta_star_) {
    require(feature_map_.has_value(), ErrorKind::InvalidArgument,
            "theta_star requires a feature map");
    require(static_cast<std::size_t>(theta_star_->size()) == feature_map_->dim(),
            ErrorKind::InvalidArgument, "theta_star dimension mismatch");
  }
}

std::optional<std::size_t> PolicyClass::index_of(const Policy& policy) const {
  for (std::size_t i = 0; i < policies_.size(); ++i) {
    if (policies_[i] == policy) return i;
  }
  return std::nullopt;
}

PolicyClass PolicyClass::subset(const std::vector<std::size_t>& indices) const {
  std::vector<Policy> kept;
  kept.reserve(indices.size());
  for (std::size_t i : indices) kept.push_back(policies_.at(i));
  return PolicyClass(num_contexts_, num_actions_, std::move(kept), feature_map_, theta_star_);
}

Allocation::Allocation(Eigen::MatrixXd rows) : rows_(std::move(rows)) {
  require(rows_.rows() >= 1 && rows_.cols() >= 1, ErrorKind::InvalidArgument,
          "allocation must be nonempty");
  for (Eigen::Index c = 0; c < rows_.rows(); ++c) {
    require((rows_.row(c).array() >= 0.0).all() && rows_.row(c).allFinite(),
            ErrorKind::InvalidArgument, "allocation entries must be nonnegative");
    require(std::abs(rows_.row(c).sum() - 1.0) <= 1e-9, ErrorKind::InvalidArgument,
            "allocation row " + std::to_string(c) + " is not normalized");
  }
}

Allocation Allocation::uniform(std::size_t num_contexts, std::size_t num_actions) {
  return Allocation(Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(num_contexts),
                                              static_cast<Eigen::Index>(num_actions),
                                              1.0 / static_cast<double>(num_actions)));
}

Allocation Allocation::from_policy(const Policy& policy, std::size_t num_actions) {
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(policy.num_contexts()),
                                               static_cast<Eigen::Index>(num_actions));
  for (Context c = 0; c < policy.num_contexts(); ++c) {
    rows(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(policy(c))) = 1.0;
  }
  return Allocation(std::move(rows));
}

void validate_realizable(const BanditInstance& instance, const PolicyClass& policies,
                         double tol) {
  if (!policies.theta_star()) return;
  const FeatureMap& phi = *policies.feature_map();
  const Eigen::VectorXd& theta = *policies.theta_star();
  for (Context c = 0; c < instance.num_contexts(); ++c) {
    for (Action a = 0; a < instance.num_actions(); ++a) {
      const double v = phi(c, a).dot(theta);
      require(std::abs(v - instance.reward(c, a)) <= tol, ErrorKind::InvalidArgument,
              "theta_star does not reproduce r(" + std::to_string(c) + "," +
                  std::to_string(a) + ")");
    }
  }
}

Problem make_hard_instance(std::size_t m, double gap, NoiseModel noise) {
  require(m >= 2, ErrorKind::InvalidArgument, "hard instance needs m >= 2");
  require(gap > 0.0 && gap <= 1.0, ErrorKind::InvalidArgument, "hard instance gap must lie in (0,1]");
  std::vector<Policy> policies;
  policies.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<Action> actions(m, 0);
    actions[i] = 1;
    policies.emplace_back(std::move(actions));
  }
  std::vector<double> reward(m * 2, 0.0);
  for (Context c = 0; c < m; ++c) reward[c * 2 + policies[0](c)] = gap;
  BanditInstance instance(std::vector<double>(m, 1.0 / static_cast<double>(m)), 2,
                          std::move(reward), noise);
  PolicyClass cls(m, 2, std::move(policies));
  return {std::move(instance), std::move(cls)};
}

PolicyClass make_trivial_class(const BanditInstance& instance, std::size_t cap) {
  const std::size_t C = instance.num_contexts();
  const std::size_t A = instance.num_actions();
  std::size_t total = 1;
  for (std::size_t c = 0; c < C; ++c) {
    require(total <= cap / A, ErrorKind::SizeLimit,
            "trivial class exceeds the enumeration cap of " + std::to_string(cap) + " policies");
    total *= A;
  }
  std::vector<Policy> policies;
  policies.reserve(total);
  std::vector<Action> digits(C, 0);
  for (std::size_t k = 0; k < total; ++k) {
    policies.emplace_back(digits);
    for (std::size_t pos = C; pos-- > 0;) {
      if (++digits[pos] < A) break;
      digits[pos] = 0;
    }
  }
  return PolicyClass(C, A, std::move(policies));
}

FeatureMap one_hot_feature_map(const BanditInstance& instance) {
  const auto d = static_cast<Eigen::Index>(instance.num_contexts() * instance.num_actions());
  return FeatureMap(instance.num_contexts(), instance.num_actions(),
                    Eigen::MatrixXd::Identity(d, d));
}

Eigen::VectorXd one_hot_theta(const BanditInstance& instance) {
  const auto& r = instance.reward_table();
  return Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
}

PolicyClass with_one_hot_features(const BanditInstance& instance, const PolicyClass& policies) {
  return PolicyClass(policies.num_contexts(), policies.num_actions(), policies.policies(),
                     one_hot_feature_map(instance), one_hot_theta(instance));
}

FeatureMap features_or_one_hot(const BanditInstance& instance, const PolicyClass& policies) {
  if (policies.feature_map()) return *policies.feature_map();
  return one_hot_feature_map(instance);
}

Eigen::VectorXd policy_embedding(const BanditInstance& instance, const FeatureMap& features,
                                 const Policy& policy) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(features.dim()));
  for (Context c = 0; c < instance.num_contexts(); ++c) {
    out += instance.nu(c) * features(c, policy(c));
  }
  return out;
}

std::vector<Eigen::VectorXd> policy_embeddings(const BanditInstance& instance,
                                               const FeatureMap& features,
                                               const PolicyClass& policies) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(policies.size());
  for (const auto& p : policies.policies()) out.push_back(policy_embedding(instance, features, p));
  return out;
}

double policy_value(const BanditInstance& instance, const Policy& policy) {
  double v = 0.0;
  for (Context c = 0; c < instance.num_contexts(); ++c) {
    v += instance.nu(c) * instance.reward(c, policy(c));
  }
  return v;
}

std::vector<double> policy_values(const BanditInstance& instance, const PolicyClass& policies) {
  std::vector<double> out;
  out.reserve(policies.size());
  for (const auto& p : policies.policies()) out.push_back(policy_value(instance, p));
  return out;
}

std::size_t optimal_policy(const BanditInstance& instance, const PolicyClass& policies,
                           double tol) {
  require(policies.size() > 0, ErrorKind::InvalidArgument, "empty policy class");
  const auto values = policy_values(instance, policies);
  const auto best = static_cast<std::size_t>(
      std::max_element(values.begin(), values.end()) - values.begin());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i != best && values[best] - values[i] <= tol) {
      fail(ErrorKind::AmbiguousOptimum, "policies " + std::to_string(best) + " and " +
                                            std::to_string(i) + " are both optimal");
    }
  }
  return best;
}

std::vector<int> disagreement_vector(const PolicyClass& policies, Context c, Action a,
                                     const Policy& pivot) {
  std::vector<int> out;
  out.reserve(policies.size());
  for (const auto& p : policies.policies()) out.push_back(disagreement(p, pivot, c, a));
  return out;
}

namespace {

Action sample_row(const Allocation& allocation, Context c, Rng& rng) {
  const std::size_t A = allocation.num_actions();
  const double u = uniform01(rng);
  double acc = 0.0;
  Action last_positive = 0;
  for (Action a = 0; a < A; ++a) {
    const double p = allocation(c, a);
    if (p <= 0.0) continue;
    last_positive = a;
    acc += p;
    if (u < acc) return a;
  }
  return last_positive;
}

}  // namespace

Interaction sample_interaction(const BanditInstance& instance, const Allocation& allocation,
                               Rng& rng) {
  require(allocation.num_contexts() == instance.num_contexts() &&
              allocation.num_actions() == instance.num_actions(),
          ErrorKind::InvalidArgument, "allocation shape does not match the instance");
  const Context c = instance.sample_context(rng);
  const Action a = sample_row(allocation, c, rng);
  const double r = instance.sample_reward(c, a, rng);
  return {c, a, r, allocation(c, a)};
}

Interaction sample_interaction(const BanditInstance& instance, const Policy& policy, Rng& rng) {
  const Context c = instance.sample_context(rng);
  const Action a = policy(c);
  return {c, a, instance.sample_reward(c, a, rng), 1.0};
}

BanditInstance make_random_instance(std::size_t num_contexts, std::size_t num_actions, Rng& rng,
                                    NoiseModel noise) {
  std::vector<double> nu(num_contexts);
  double total = 0.0;
  for (auto& v : nu) {
    v = -std::log(1.0 - uniform01(rng));
    total += v;
  }
  for (auto& v : nu) v /= total;
  // Renormalize once more so the sum is exact to rounding.
  total = std::accumulate(nu.begin(), nu.end(), 0.0);
  for (auto& v : nu) v /= total;
  std::vector<double> reward(num_contexts * num_actions);
  for (auto& r : reward) r = uniform01(rng);
  return BanditInstance(std::move(nu), num_actions, std::move(reward), noise, rng());
}

PolicyClass make_random_class(std::size_t num_contexts, std::size_t num_actions,
                              std::size_t count, Rng& rng) {
  double total = std::pow(static_cast<double>(num_actions), static_cast<double>(num_contexts));
  if (static_cast<double>(count) >= total) {
    BanditInstance dummy(std::vector<double>(num_contexts, 1.0 / static_cast<double>(num_contexts)),
                         num_actions, std::vector<double>(num_contexts * num_actions, 0.0));
    return make_trivial_class(dummy);
  }
  std::set<Policy> seen;
  std::vector<Policy> policies;
  while (policies.size() < count) {
    std::vector<Action> actions(num_contexts);
    for (auto& a : actions) a = static_cast<Action>(rng() % num_actions);
    Policy p(std::move(actions));
    if (seen.insert(p).second) policies.push_back(std::move(p));
  }
  return PolicyClass(num_contexts, num_actions, std::move(policies));
}

std::string instance_to_json(const BanditInstance& instance) {
  json j;
  j["contexts"] = instance.num_contexts();
  j["actions"] = instance.num_actions();
  j["nu"] = instance.nu();
  j["mean_reward"] = instance.reward_table();
  j["noise"] = {{"kind", to_string(instance.noise().kind)}, {"sigma", instance.noise().sigma}};
  j["rng_seed"] = instance.rng_seed();
  return j.dump(2);
}

BanditInstance instance_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    const auto C = j.at("contexts").get<std::size_t>();
    const auto A = j.at("actions").get<std::size_t>();
    auto nu = j.at("nu").get<std::vector<double>>();
    require(nu.size() == C, ErrorKind::InvalidArgument, "nu length must equal contexts");
    NoiseModel noise;
    if (j.contains("noise")) {
      const auto kind = j.at("noise").at("kind").get<std::string>();
      if (kind == "gaussian_clipped") {
        noise = NoiseModel::gaussian_clipped(j.at("noise").at("sigma").get<double>());
      } else {
        require(kind == "bernoulli", ErrorKind::InvalidArgument, "unknown noise kind " + kind);
      }
    }
    return BanditInstance(std::move(nu), A, j.at("mean_reward").get<std::vector<double>>(), noise,
                          j.value("rng_seed", std::uint64_t{0}));
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string("malformed instance json: ") + e.what());
  }
}

std::string policy_class_to_json(const PolicyClass& policies) {
  json j;
  j["contexts"] = policies.num_contexts();
  j["actions"] = policies.num_actions();
  json rows = json::array();
  for (const auto& p : policies.policies()) rows.push_back(p.actions());
  j["policies"] = std::move(rows);
  if (policies.feature_map()) {
    const auto& phi = *policies.feature_map();
    json table = json::array();
    for (Eigen::Index i = 0; i < phi.rows().rows(); ++i) {
      std::vector<double> row(phi.dim());
      for (std::size_t k = 0; k < phi.dim(); ++k) row[k] = phi.rows()(i, static_cast<Eigen::Index>(k));
      table.push_back(std::move(row));
    }
    j["feature_map"] = {{"dim", phi.dim()}, {"rows", std::move(table)}};
  }
  if (policies.theta_star()) {
    const auto& t = *policies.theta_star();
    j["theta_star"] = std::vector<double>(t.data(), t.data() + t.size());
  }
  return j.dump(2);
}

PolicyClass policy_class_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    const auto C = j.at("contexts").get<std::size_t>();
    const auto A = j.at("actions").get<std::size_t>();
    std::vector<Policy> policies;
    for (const auto& row : j.at("policies")) policies.emplace_back(row.get<std::vector<Action>>());
    std::optional<FeatureMap> phi;
    if (j.contains("feature_map")) {
      const auto& fm = j.at("feature_map");
      const auto d = fm.at("dim").get<std::size_t>();
      const auto& rows = fm.at("rows");
      Eigen::MatrixXd table(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto row = rows[i].get<std::vector<double>>();
        require(row.size() == d, ErrorKind::InvalidArgument, "feature row length mismatch");
        for (std::size_t k = 0; k < d; ++k) {
          table(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k];
        }
      }
      phi.emplace(C, A, std::move(table));
    }
    std::optional<Eigen::VectorXd> theta;
    if (j.contains("theta_star")) {
      const auto t = j.at("theta_star").get<std::vector<double>>();
      theta = Eigen::Map<const Eigen::VectorXd>(t.data(), static_cast<Eigen::Index>(t.size()));
    }
    return PolicyClass(C, A, std::move(policies), std::move(phi), std::move(theta));
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string("malformed policy class json: ") + e.what());
  }
}

}  // namespace pacbandit

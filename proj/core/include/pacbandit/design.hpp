#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pacbandit/bandit.hpp"

namespace pacbandit {

// Weights used for expectations over contexts: the instance law nu or the
// empirical law of an offline dataset.
class ContextWeights {
 public:
  struct Entry {
    Context context;
    double weight;
  };

  static ContextWeights from_instance(const BanditInstance& instance);
  static ContextWeights from_contexts(std::span<const Context> draws, std::size_t num_contexts);

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t num_contexts() const { return num_contexts_; }
  double weight(Context c) const;

 private:
  ContextWeights(std::vector<Entry> entries, std::size_t num_contexts)
      : entries_(std::move(entries)), num_contexts_(num_contexts) {}

  std::vector<Entry> entries_;
  std::size_t num_contexts_;
};

struct SolverConfig {
  int max_iterations = 5000;
  double step_scale = 0.5;
  // Relative duality gap below which the solve is reported as converged.
  double tol = 1e-3;
  double clip = 1e-12;
  double ridge = 1e-10;
};

struct DesignValue {
  double value = 0.0;
  std::size_t argmax_policy = 0;
  // The policy the witness is compared against (pi* for rho, the other
  // member of the pair for pairwise designs).
  std::size_t argmax_partner = 0;
  Allocation allocation = Allocation::uniform(1, 1);
  double lower_bound = 0.0;
  bool converged = false;
  int iterations = 0;
  std::size_t clip_count = 0;
};

std::string design_value_to_json(const DesignValue& value);

// min_p max_{pi != pi*} E_c[(1/p_{c,pi(c)} + 1/p_{c,pi*(c)}) 1{pi(c) != pi*(c)}] / (gap(pi) v eps)^2.
DesignValue rho_combinatorial(const BanditInstance& instance, const PolicyClass& policies,
                              double epsilon, const SolverConfig& config = {});

// min_w max_{pi != pi*} ||phi_pi - phi_pi*||^2_{A(w)^-1} / (<phi_pi* - phi_pi, theta*>^2 v eps^2).
DesignValue rho_linear(const BanditInstance& instance, const PolicyClass& policies,
                       double epsilon, const SolverConfig& config = {});

// min_w max over pairs of `active` of ||phi_pi - phi_pi'||^2_{A(w)^-1}, with the
// features of `policies` (one-hot when none are attached).
DesignValue pairwise_design(const BanditInstance& instance, const PolicyClass& policies,
                            const std::vector<std::size_t>& active,
                            const SolverConfig& config = {});

// sum_{c,a} w_{c,a} phi(c,a) phi(c,a)^T + ridge * I.
Eigen::MatrixXd design_matrix(const BanditInstance& instance, const FeatureMap& features,
                              const Allocation& allocation, double ridge = 1e-10);

Eigen::MatrixXd design_inverse(const BanditInstance& instance, const FeatureMap& features,
                               const Allocation& allocation, double ridge = 1e-10);

double design_norm(const BanditInstance& instance, const FeatureMap& features,
                   const Allocation& allocation, const Eigen::VectorXd& phi_pi,
                   const Eigen::VectorXd& phi_other, double ridge = 1e-10);

// E_c[(1/p_{c,pi(c)} + 1/p_{c,other(c)}) 1{pi(c) != other(c)}].
double combinatorial_norm(const ContextWeights& weights, const Allocation& allocation,
                          const Policy& pi, const Policy& other);

// A policy with dual weight lambda and regularizer gamma.
struct WeightedPolicy {
  std::size_t policy;
  double lambda;
  double gamma;
};

// E_c[(sum_a sqrt((lambda*gamma)^T (t_a^{(c)} + eta)))^2].
double closed_form_design_value(const PolicyClass& policies,
                                std::span<const WeightedPolicy> support, std::size_t pivot,
                                const ContextWeights& weights, double eta);

// Rows p_{c,a} proportional to sqrt((lambda*gamma)^T (t_a^{(c)} + eta)). A row
// with zero normalizer falls back to uniform and sets `degenerate`.
Allocation allocation_from_lambda_gamma(const PolicyClass& policies,
                                        std::span<const WeightedPolicy> support,
                                        std::size_t pivot, double eta,
                                        bool* degenerate = nullptr);

// max_c (2 / nu_c) sum_{a != pi*(c)} gap_{c,a}^{-2} for the trivial class.
double trivial_class_bound(const BanditInstance& instance);

struct DisagreementCoefficients {
  double policy = 0.0;
  double cost_sensitive = 0.0;
};

DisagreementCoefficients disagreement_coefficients(const BanditInstance& instance,
                                                   const PolicyClass& policies,
                                                   double epsilon0);

// min over contexts and suboptimal actions of r(c, pi*(c)) - r(c, a).
double uniform_gap(const BanditInstance& instance, const PolicyClass& policies);

}  // namespace pacbandit

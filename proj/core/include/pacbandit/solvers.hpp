#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pacbandit/bandit.hpp"
#include "pacbandit/design.hpp"
#include "pacbandit/estimators.hpp"
#include "pacbandit/oracle.hpp"

namespace pacbandit {

// Constants of one round's dual objective
//   h(lambda, gamma, n) = sum_pi lambda_pi (-gap_scale * D(pi) + log_coef / (gamma_pi n))
//                         + E_c[(sum_a sqrt((lambda*gamma)^T (t_a^{(c)} + eta)))^2]
// where D(pi) is the previous round's gap estimate of pi against the pivot,
// normalized per sample.
struct RoundParams {
  double epsilon = 0.5;
  double delta = 0.05;
  double eta = 0.0;
  std::size_t pivot = 0;
  double log_coef = 0.0;
  double gap_scale = 1.0;
  // Previous gap estimate of each policy; empty means zero for all.
  std::function<double(std::size_t)> previous_gap;
  // Oracle mode: the previous round's samples and regularizers, so gaps of
  // policies off the previous support can be expressed as cost vectors.
  const RewardTable* rewards = nullptr;
  double gamma0_prev = 0.0;
  std::vector<std::size_t> previous_support;
};

// eta_l = c1 * eps^2 * |A|^-4.
double smoothing_eta(double epsilon, std::size_t num_actions, double c1 = 1.0);

struct GammaBox {
  double min;
  double max;
};

// [sqrt(eta * log_coef / n) / 3, sqrt(log_coef / (|A|^2 eta n))].
GammaBox gamma_box(const RoundParams& params, std::size_t num_actions, double n);

// Sparse lambda with per-policy gamma; policies off the support carry gamma0.
struct DualIterate {
  std::vector<WeightedPolicy> support;
  double gamma0 = 0.0;
  double n = 1.0;

  double lambda(std::size_t policy) const;
  double gamma(std::size_t policy) const;
};

struct GapCertificate {
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  double fw_gap = 0.0;
  int iterations = 0;
};

std::string certificate_to_json(const GapCertificate& certificate);

// Checks the simplex and gamma-box invariants.
void validate_iterate(const DualIterate& iterate, const RoundParams& params,
                      std::size_t num_actions, double slack = 1e-9);

double eval_h(const PolicyClass& policies, const DualIterate& iterate, const RoundParams& params,
              const ContextWeights& weights);

// One coordinate of the lambda-gradient of h.
double grad_lambda_h(const PolicyClass& policies, const DualIterate& iterate,
                     const RoundParams& params, const ContextWeights& weights,
                     std::size_t policy);

// All coordinates, by enumeration.
std::vector<double> grad_lambda_h(const PolicyClass& policies, const DualIterate& iterate,
                                  const RoundParams& params, const ContextWeights& weights);

struct GradientArgmax {
  std::size_t policy = 0;
  double gradient = 0.0;
  // max_pi of the primal term, over the same candidates.
  double primal = 0.0;
  std::uint64_t oracle_calls = 0;
  std::uint64_t constrained_calls = 0;
  // Policies evaluated directly and contexts given to the descent.
  std::size_t tracked = 0;
  std::size_t contexts = 0;
};

// argmax_pi of the gradient, through the oracle when one is given: policies on
// the current or previous support are evaluated directly and the rest through
// the cost-sensitive reduction.
GradientArgmax gradient_argmax(const PolicyClass& policies, const DualIterate& iterate,
                               const RoundParams& params, const ContextWeights& weights,
                               ArgmaxOracle* oracle = nullptr);

// max_pi (-gap_scale * D(pi) + gamma_pi ||phi_pi - phi_pivot||^2 + log_coef / (gamma_pi n))
// with the norm taken under the allocation induced by the iterate.
double primal_value(const PolicyClass& policies, const DualIterate& iterate,
                    const RoundParams& params, const ContextWeights& weights,
                    std::size_t* argmax = nullptr);

struct GdConfig {
  int max_iterations = 100000;
  // Multi-start from the box ends as well as the current point.
  bool multi_start = false;
};

struct GdResult {
  DualIterate iterate;
  double h = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Minimizes h over the gamma box on the support of lambda by exact block
// minimization: allocation for fixed gamma, then each gamma_pi in closed form.
// Each step cannot increase h. Stops when a step gains less than kappa / 1000.
GdResult gd_gamma(const PolicyClass& policies, const DualIterate& iterate,
                  const RoundParams& params, const ContextWeights& weights, double kappa,
                  const GdConfig& config = {});

struct FwConfig {
  int max_iterations = 500;
  double n0 = 16.0;
  double n_max = 1073741824.0;
  // Use the worst-case smoothness constant in the step size instead of a
  // backtracking estimate, and multi-start the gamma solve.
  bool strict = false;
  // Stop a fixed-n solve once primal - dual is below this fraction of eps.
  double certificate_fraction = 0.1;
  // Abandon an n as soon as the dual value certifiably exceeds eps.
  bool early_reject = true;
  GdConfig gd;
};

struct FwResult {
  DualIterate iterate;
  GapCertificate certificate;
  bool success = false;
  int solves = 0;
  std::uint64_t oracle_calls = 0;
  // Largest number of oracle calls spent on one gradient argmax.
  std::uint64_t max_calls_per_iteration = 0;
  // Every FW step grew the support by at most one policy.
  bool support_growth_ok = true;
  // Every gradient argmax used at most (tracked policies) x (contexts)
  // constrained calls.
  bool oracle_budget_ok = true;
};

// L = |A|^2 ((1 + eta) gamma_max)^{5/2} / (eta^{3/2} gamma_min^2).
double fw_smoothness(const RoundParams& params, std::size_t num_actions, double n);

FwResult fw_gd_fixed_n(const PolicyClass& policies, const RoundParams& params,
                       const ContextWeights& weights, double n, const FwConfig& config = {},
                       ArgmaxOracle* oracle = nullptr);

// Smallest n in {n0 * 2^k} whose solve ends with h <= eps and |P - h| <= eps.
FwResult fw_gd(const PolicyClass& policies, const RoundParams& params,
               const ContextWeights& weights, const FwConfig& config = {},
               ArgmaxOracle* oracle = nullptr);

}  // namespace pacbandit

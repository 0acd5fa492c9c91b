#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pacbandit/bandit.hpp"

namespace pacbandit {

// One logged interaction with the propensity used when it was sampled.
struct SampleRecord {
  Context context;
  Action action;
  double reward;
  double propensity;
};

using SampleBatch = std::vector<SampleRecord>;

struct CatoniConfig {
  double variance_bound = 1.0;
  double delta = 0.05;
  int max_iter = 200;
  double tol = 1e-10;
};

// Value with a multiplicity; lets callers pass compressed samples.
struct WeightedValue {
  double value;
  double count;
};

double catoni_psi(double x);

// Scale alpha for n samples.
double catoni_alpha(double n, const CatoniConfig& config);

// High-probability deviation bound sigma * sqrt(2 log(2/delta) / (n - log(2/delta))).
double catoni_deviation_bound(double n, double variance_bound, double delta);

double catoni_mean(std::span<const double> values, const CatoniConfig& config);
double catoni_mean(std::span<const WeightedValue> values, const CatoniConfig& config);

// Regularized IPS gap of `pi` against `pivot`: a sum over the batch (not an
// average) of r / (p + gamma) * (1{pivot(c)=a} - 1{pi(c)=a}).
double ips_gap_estimate(const SampleBatch& batch, const Policy& pi, const Policy& pivot,
                        double gamma);

// Reward sums per (context, action) for a batch drawn from one allocation, so
// each cell has a single propensity.
struct RewardTable {
  Eigen::MatrixXd reward_sum;
  Eigen::MatrixXd count;
  Eigen::MatrixXd propensity;
  double n = 0.0;

  static RewardTable from_batch(const SampleBatch& batch, std::size_t num_contexts,
                                std::size_t num_actions);
};

// Same sum as above computed from a reward table.
double ips_gap_estimate(const RewardTable& table, const Policy& pi, const Policy& pivot,
                        double gamma);

// A(w)^{-1} phi(c, a) r for one record.
Eigen::VectorXd linear_observation(const SampleRecord& record, const FeatureMap& features,
                                   const Eigen::MatrixXd& design_inverse);

std::string batch_to_csv(const SampleBatch& batch);
SampleBatch batch_from_csv(std::string_view text);

}  // namespace pacbandit

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pacbandit/algorithms.hpp"
#include "pacbandit/bandit.hpp"
#include "pacbandit/design.hpp"

namespace pacbandit {

// kind: "hard" (m contexts, two actions), "trivial" (random instance with the
// full deterministic class), "linear" (random instance, random class with
// one-hot features), or "file" (JSON with "instance" and "policies").
struct InstanceSpec {
  std::string kind = "hard";
  std::vector<std::size_t> m = {4};
  double gap = 1.0;
  std::size_t contexts = 3;
  std::size_t actions = 3;
  std::size_t policies = 8;
  std::uint64_t seed = 0;
  std::string path;
};

struct ExperimentConfig {
  InstanceSpec instance;
  std::vector<std::string> learners = {"coda"};
  double epsilon = 0.1;
  double delta = 0.1;
  std::vector<std::uint64_t> seeds = {0};
  // 0 picks OfflineDataset::default_size.
  std::size_t offline_size = 0;
  SolverConfig design;
  FwConfig fw;
  std::optional<std::uint64_t> oracle_cap;
  std::string out = "results";
  bool strict_constants = false;
  // 0 uses the hardware concurrency.
  std::size_t workers = 0;

  // Throws ErrorKind::Config naming every offending field.
  void validate() const;

  // Seeds may be a list or {"start": s, "count": k}; m may be a number or a list.
  static ExperimentConfig from_json(std::string_view text);
  std::string to_json() const;
};

// Hard instance, m in {4, 8, 16}, CODA against the regret baseline.
ExperimentConfig separation_preset(std::size_t num_seeds, double gap = 1.0, double delta = 0.1);

inline constexpr const char* kOutputDirEnv = "PACBANDIT_OUT";

// `config.out`, unless the environment variable above is set and nonempty.
std::filesystem::path resolve_output_dir(const ExperimentConfig& config);

// Builds the problem for one value of m (ignored unless the kind is "hard").
Problem build_problem(const InstanceSpec& spec, std::size_t m);

struct RunRow {
  std::uint64_t seed = 0;
  std::string learner;
  std::size_t m = 0;
  double epsilon = 0.0;
  double delta = 0.0;
  std::uint64_t tau = 0;
  bool success = false;
  std::uint64_t oracle_calls = 0;
};

// Runs one learner on one problem with the per-seed streams: offline contexts
// from derive_seed(seed, 1), interactions from derive_seed(seed, 2).
LearnerResult run_learner(const std::string& learner, const Problem& problem,
                          const ExperimentConfig& config, std::uint64_t seed);

struct ExperimentResult {
  std::filesystem::path dir;
  std::vector<std::filesystem::path> records;
  std::filesystem::path csv;
  std::filesystem::path summary;
  std::vector<RunRow> rows;
};

// Writes records/<learner>_m<m>_seed<seed>.json per run, runs.csv with columns
// seed,learner,m,epsilon,delta,tau,success,oracle_calls in (m, learner, seed)
// order, and summary.json with per-cell success rates, median tau and the
// log-log slope of median tau against m per learner.
ExperimentResult run_experiment(const ExperimentConfig& config);

std::string rows_to_csv(const std::vector<RunRow>& rows);
std::string summarize_rows(const std::vector<RunRow>& rows);

// Least-squares slope of log y against log x.
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

double median(std::vector<double> values);

struct BoundsReport {
  double rho_epsilon = 0.0;
  double rho_zero = 0.0;
  // max(eps, smallest positive gap).
  double delta_epsilon = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::optional<double> regret_pac;
  double trivial = 0.0;
  DisagreementCoefficients disagreement;
  // (2 |A| / eps) * cost-sensitive disagreement coefficient.
  double disagreement_bound = 0.0;
};

// rho_0 log(1 / 2.4 delta).
double lower_bound_formula(double rho_zero, double delta);
// rho_eps log(|Pi| max(1, log2(1/eps)) / delta) max(1, log(1 / Delta_eps)).
double upper_bound_formula(double rho_epsilon, std::size_t num_policies, double epsilon,
                           double delta, double delta_epsilon);
// m^2 Delta^-2 log^2(1 / 2.4 delta) / (4 alpha).
double regret_pac_formula(std::size_t m, double gap, double delta, double alpha);

// `hard_m` and `hard_gap` fill in the regret-PAC bound with alpha = log m.
BoundsReport predicted_bounds(const BanditInstance& instance, const PolicyClass& policies,
                              double epsilon, double delta,
                              std::optional<std::size_t> hard_m = std::nullopt,
                              double hard_gap = 1.0, const SolverConfig& config = {});

std::string bounds_to_json(const BoundsReport& report);

}  // namespace pacbandit

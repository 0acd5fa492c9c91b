#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pacbandit/bandit.hpp"
#include "pacbandit/design.hpp"
#include "pacbandit/oracle.hpp"
#include "pacbandit/rng.hpp"
#include "pacbandit/solvers.hpp"

namespace pacbandit {

// Gap estimates are oriented so that gap(pi, ref) estimates V(ref) - V(pi).
struct GapEntry {
  std::size_t policy;
  double gap;
};

struct RoundRecord {
  int round = 0;
  double epsilon = 0.0;
  std::uint64_t samples = 0;
  // Smallest sampling probability over contexts with positive weight, and the
  // full per-context rows when the table is small.
  double min_propensity = 0.0;
  std::vector<std::vector<double>> allocation;
  double design_value = 0.0;
  std::size_t pivot = 0;
  std::vector<std::size_t> active;
  std::vector<GapEntry> gaps;
  std::uint64_t oracle_calls = 0;
  std::optional<GapCertificate> certificate;
};

struct RunRecord {
  std::string learner;
  std::vector<RoundRecord> rounds;
  std::size_t chosen = 0;
  std::uint64_t tau = 0;
  std::uint64_t oracle_calls = 0;
  bool failed = false;
  std::string failure;
  double wall_seconds = 0.0;
};

// Wall time is left out unless asked for, so equal runs serialize to equal bytes.
std::string run_record_to_json(const RunRecord& record, bool include_timing = false);

struct LearnerResult {
  std::size_t index = 0;
  Policy policy;
  RunRecord record;
};

// Contexts drawn i.i.d. from the instance law ahead of time.
struct OfflineDataset {
  std::vector<Context> contexts;

  static OfflineDataset draw(const BanditInstance& instance, std::size_t size,
                             std::uint64_t seed);
  // 10^4 * ceil(log |Pi|), at least 10^4.
  static std::size_t default_size(std::size_t num_policies);
  ContextWeights weights(std::size_t num_contexts) const;
};

struct LearnerConfig {
  double epsilon = 0.1;
  double delta = 0.1;
  SolverConfig design;
  FwConfig fw;
  // eta_l = c1 eps_l^2 |A|^-4.
  double c1 = 1.0;
  // Multiplier on the confidence width of the non-elimination design.
  double width_multiplier = 1.0;
  // Round cap when eps = 0 asks elimination to run until one policy is left.
  int max_rounds = 20;
  // Worst-case constants (width multiplier 28, theoretical FW step).
  bool strict = false;
};

LearnerResult elimination_rage(const BanditInstance& instance, const PolicyClass& policies,
                               const LearnerConfig& config, Rng& rng);

LearnerResult nonelim_rage(const BanditInstance& instance, const PolicyClass& policies,
                           const LearnerConfig& config, Rng& rng);

// `oracle` must enumerate or otherwise search `policies`.
LearnerResult coda(const BanditInstance& instance, const PolicyClass& policies,
                   const LearnerConfig& config, const OfflineDataset& offline,
                   ArgmaxOracle& oracle, Rng& rng);

// Uniform actions with importance-weighted value estimates; stops once the
// empirical leader is separated from every other policy by the Hoeffding
// widths at confidence delta (union over policies and time).
LearnerResult regret_baseline(const BanditInstance& instance, const PolicyClass& policies,
                              const LearnerConfig& config, Rng& rng);

// Independent uniform-sampling best-arm identification in every context with
// confidence delta / |C|; returns the composed policy of the trivial class.
LearnerResult per_context_bai_baseline(const BanditInstance& instance,
                                       const LearnerConfig& config, Rng& rng);

}  // namespace pacbandit

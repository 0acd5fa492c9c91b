#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pacbandit/bandit.hpp"
#include "pacbandit/design.hpp"
#include "pacbandit/estimators.hpp"

namespace pacbandit {

// Cost-sensitive classification data: each item is a context and a cost row
// over actions. A policy scores sum_i cost_i[pi(c_i)]; `offset` is a
// constant added by producers so score + offset reproduces an objective.
class CostWeightedDataset {
 public:
  struct Item {
    Context context;
    std::vector<double> cost;
  };

  explicit CostWeightedDataset(std::size_t num_actions) : num_actions_(num_actions) {}

  void add(Context context, std::vector<double> cost);
  const std::vector<Item>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  std::size_t num_actions() const { return num_actions_; }
  double offset() const { return offset_; }
  void set_offset(double offset) { offset_ = offset; }

  double score(const Policy& policy) const;
  // Distinct contexts in first-appearance order.
  std::vector<Context> contexts() const;

  std::string to_csv() const;

 private:
  std::size_t num_actions_;
  std::vector<Item> items_;
  double offset_ = 0.0;
};

// Call accounting shared by concurrent oracle users. The cap applies to
// constrained calls.
class OracleBudget {
 public:
  explicit OracleBudget(std::optional<std::uint64_t> cap = std::nullopt) : cap_(cap) {}

  void charge_amo() { amo_calls_.fetch_add(1, std::memory_order_relaxed); }
  void charge_c_amo();

  std::uint64_t amo_calls() const { return amo_calls_.load(std::memory_order_relaxed); }
  std::uint64_t c_amo_calls() const { return c_amo_calls_.load(std::memory_order_relaxed); }
  std::uint64_t calls_made() const { return amo_calls() + c_amo_calls(); }
  std::optional<std::uint64_t> cap() const { return cap_; }

 private:
  std::atomic<std::uint64_t> amo_calls_{0};
  std::atomic<std::uint64_t> c_amo_calls_{0};
  std::optional<std::uint64_t> cap_;
};

struct OracleResult {
  std::size_t index;
  double score;
};

// Restricts a constrained call to policies with pi(context) != action.
struct Exclusion {
  Context context;
  Action action;
};

struct ConstrainedQuery {
  double cap = std::numeric_limits<double>::infinity();
  std::optional<Exclusion> exclude;
  // Among policies scoring exactly `cap`, only indices above this one qualify.
  std::optional<std::size_t> after_index_at_cap;
};

// Plug-in point for argmax oracles. Ties go to the lowest policy index.
class ArgmaxOracle {
 public:
  virtual ~ArgmaxOracle() = default;
  virtual const PolicyClass& policies() const = 0;
  virtual OracleResult amo(const CostWeightedDataset& data) = 0;
  virtual std::optional<OracleResult> c_amo(const CostWeightedDataset& data,
                                            const ConstrainedQuery& query) = 0;
};

// Reference oracle: exhaustive enumeration of the class.
class EnumerationOracle final : public ArgmaxOracle {
 public:
  explicit EnumerationOracle(const PolicyClass& policies, OracleBudget* budget = nullptr);

  const PolicyClass& policies() const override { return policies_; }
  OracleResult amo(const CostWeightedDataset& data) override;
  std::optional<OracleResult> c_amo(const CostWeightedDataset& data,
                                    const ConstrainedQuery& query) override;

 private:
  std::vector<double> scores(const CostWeightedDataset& data) const;

  const PolicyClass& policies_;
  OracleBudget* budget_;
};

OracleResult amo(const PolicyClass& policies, const CostWeightedDataset& data);

std::optional<OracleResult> c_amo(const PolicyClass& policies, const CostWeightedDataset& data,
                                  double cap);

// Argmax of the dataset score over the class minus `forbidden`, by repeatedly
// descending from the unconstrained argmax with one exclusion-constrained call
// per context of `contexts`. Policies are ranked by (score desc, index asc) so
// ties cannot cycle. `contexts` must separate the policies: two policies that
// agree on all of them are indistinguishable to the descent.
OracleResult constrained_argmax_avoiding(ArgmaxOracle& oracle, const CostWeightedDataset& data,
                                         const std::vector<std::size_t>& forbidden,
                                         std::span<const Context> contexts);

// Inputs of the dual gradient for policies off the tracked supports.
struct CscInputs {
  std::size_t pivot = 0;
  // Current sparse iterate; policies not listed carry gamma0.
  std::span<const WeightedPolicy> support;
  double gamma0 = 0.0;
  double eta = 0.0;
  double log_coef = 0.0;
  double n = 1.0;
  // Previous round's samples and its off-support regularizer; the reward part
  // is normalized by the previous sample count. Null in the first round.
  const RewardTable* rewards = nullptr;
  double gamma0_prev = 0.0;
  double gap_scale = 1.0;
};

// Cost vectors whose dataset score plus offset equals the dual gradient
// coordinate of every policy that is on neither support. One item per
// context with positive weight carries the design part; one item per
// rewarded cell carries the reward part.
CostWeightedDataset gradient_to_csc(const PolicyClass& policies, const CscInputs& inputs,
                                    const ContextWeights& weights);

}  // namespace pacbandit

#include "pacbandit/algorithms.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <tuple>

#include "json.hpp"

#include "eigen_index.hpp"
#include "pacbandit/error.hpp"
#include "pacbandit/estimators.hpp"

namespace pacbandit {

std::string run_record_to_json(const RunRecord& record, bool include_timing) {
  nlohmann::ordered_json j;
  j["learner"] = record.learner;
  j["chosen"] = record.chosen;
  j["tau"] = record.tau;
  j["oracle_calls"] = record.oracle_calls;
  j["failed"] = record.failed;
  if (record.failed) j["failure"] = record.failure;
  if (include_timing) j["wall_seconds"] = record.wall_seconds;
  auto rounds = nlohmann::ordered_json::array();
  for (const auto& r : record.rounds) {
    nlohmann::ordered_json jr;
    jr["round"] = r.round;
    jr["epsilon"] = r.epsilon;
    jr["samples"] = r.samples;
    jr["min_propensity"] = r.min_propensity;
    if (!r.allocation.empty()) jr["allocation"] = r.allocation;
    jr["design_value"] = r.design_value;
    jr["pivot"] = r.pivot;
    if (!r.active.empty()) jr["active"] = r.active;
    auto gaps = nlohmann::ordered_json::array();
    for (const auto& g : r.gaps) gaps.push_back({g.policy, g.gap});
    jr["gaps"] = std::move(gaps);
    jr["oracle_calls"] = r.oracle_calls;
    if (r.certificate) jr["certificate"] = nlohmann::ordered_json::parse(certificate_to_json(*r.certificate));
    rounds.push_back(std::move(jr));
  }
  j["rounds"] = std::move(rounds);
  return j.dump(2);
}

OfflineDataset OfflineDataset::draw(const BanditInstance& instance, std::size_t size,
                                    std::uint64_t seed) {
  require(size > 0, ErrorKind::InvalidArgument, "offline dataset must be nonempty");
  Rng rng = make_rng(seed);
  OfflineDataset d;
  d.contexts.reserve(size);
  for (std::size_t i = 0; i < size; ++i) d.contexts.push_back(instance.sample_context(rng));
  return d;
}

std::size_t OfflineDataset::default_size(std::size_t num_policies) {
  const double logs = std::ceil(std::log(static_cast<double>(std::max<std::size_t>(num_policies, 1))));
  return 10000 * std::max<std::size_t>(1, static_cast<std::size_t>(logs));
}

ContextWeights OfflineDataset::weights(std::size_t num_contexts) const {
  return ContextWeights::from_contexts(contexts, num_contexts);
}

namespace {

using Clock = std::chrono::steady_clock;

int rounds_for(double epsilon) {
  if (epsilon >= 1.0) return 0;
  return static_cast<int>(std::ceil(std::log2(1.0 / epsilon)));
}

// Samples sharing (context, action, reward) carry the same importance weight
// within a round, so estimators work on counted types.
struct SampleType {
  Context context;
  Action action;
  double reward;
  double propensity;
  double count;
};

struct RoundSamples {
  std::vector<SampleType> types;
  SampleBatch batch;
  std::uint64_t n = 0;
};

RoundSamples draw_round(const BanditInstance& instance, const Allocation& allocation,
                        std::uint64_t n, Rng& rng, bool keep_batch) {
  std::map<std::tuple<Context, Action, double>, std::pair<double, double>> counts;
  RoundSamples out;
  out.n = n;
  if (keep_batch) out.batch.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const Interaction x = sample_interaction(instance, allocation, rng);
    auto& slot = counts[{x.context, x.action, x.reward}];
    slot.first = x.propensity;
    slot.second += 1.0;
    if (keep_batch) out.batch.push_back({x.context, x.action, x.reward, x.propensity});
  }
  for (const auto& [key, v] : counts) {
    out.types.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), v.first, v.second});
  }
  return out;
}

void summarize_allocation(const BanditInstance& instance, const Allocation& w, RoundRecord& r) {
  double lo = 1.0;
  for (Context c = 0; c < instance.num_contexts(); ++c) {
    if (instance.nu(c) == 0.0) continue;
    for (Action a = 0; a < instance.num_actions(); ++a) lo = std::min(lo, w(c, a));
  }
  r.min_propensity = lo;
  if (instance.num_contexts() * instance.num_actions() <= 32) {
    r.allocation.clear();
    for (Context c = 0; c < instance.num_contexts(); ++c) {
      std::vector<double> row(instance.num_actions());
      for (Action a = 0; a < instance.num_actions(); ++a) row[a] = w(c, a);
      r.allocation.push_back(std::move(row));
    }
  }
}

// Catoni estimate over sample types of r * u(c, a), with u supplied per type.
template <typename F>
double catoni_over(const RoundSamples& s, double variance, double delta, F&& weight_of) {
  std::vector<WeightedValue> values;
  values.reserve(s.types.size() + 1);
  for (const auto& t : s.types) values.push_back({t.reward * weight_of(t), t.count});
  CatoniConfig cfg;
  cfg.variance_bound = variance;
  cfg.delta = delta;
  return catoni_mean(std::span<const WeightedValue>(values), cfg);
}

std::uint64_t ceil_count(double x) {
  require(std::isfinite(x) && x < 1.8e19, ErrorKind::SolverFailure,
          "sample budget is not finite: " + std::to_string(x));
  return static_cast<std::uint64_t>(std::ceil(x));
}

LearnerResult finish(const PolicyClass& policies, std::size_t index, RunRecord record,
                     Clock::time_point start) {
  record.chosen = index;
  record.tau = 0;
  record.oracle_calls = 0;
  for (const auto& r : record.rounds) {
    record.tau += r.samples;
    record.oracle_calls += r.oracle_calls;
  }
  record.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return {index, policies[index], std::move(record)};
}

void check_config(const LearnerConfig& config) {
  require(config.epsilon >= 0.0, ErrorKind::InvalidArgument, "epsilon must be nonnegative");
  require(config.delta > 0.0 && config.delta < 1.0, ErrorKind::InvalidArgument,
          "delta must lie in (0,1)");
}

}  // namespace

LearnerResult elimination_rage(const BanditInstance& instance, const PolicyClass& policies,
                               const LearnerConfig& config, Rng& rng) {
  check_config(config);
  const auto start = Clock::now();
  RunRecord record;
  record.learner = "elimination_rage";
  std::vector<std::size_t> active(policies.size());
  for (std::size_t i = 0; i < active.size(); ++i) active[i] = i;
  const FeatureMap phi = features_or_one_hot(instance, policies);
  const auto emb = policy_embeddings(instance, phi, policies);
  const double P = static_cast<double>(policies.size());
  const bool until_one = config.epsilon == 0.0;
  const int rounds = until_one ? config.max_rounds : rounds_for(config.epsilon);
  std::vector<std::vector<double>> last_gap;

  for (int l = 1; l <= rounds && active.size() > 1; ++l) {
    const double eps = std::ldexp(1.0, -l);
    const double log_term = std::log(2.0 * l * l * P / config.delta);
    const double delta_l = config.delta / (2.0 * l * l * P);
    const DesignValue dv = pairwise_design(instance, policies, active, config.design);
    std::uint64_t n = ceil_count(4.0 * dv.value * log_term / (eps * eps));
    n = std::max<std::uint64_t>(n, ceil_count(2.0 * std::log(2.0 / delta_l)) + 1);
    const RoundSamples s = draw_round(instance, dv.allocation, n, rng, false);

    const Eigen::MatrixXd Minv = design_inverse(instance, phi, dv.allocation, config.design.ridge);
    const std::size_t k = active.size();
    // gap[i][j] estimates V(active[i]) - V(active[j]); Catoni is odd in the
    // data, so the lower triangle is the negated upper one.
    std::vector<std::vector<double>> gap(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        const Eigen::VectorXd x = emb[active[i]] - emb[active[j]];
        const Eigen::VectorXd u = Minv * x;
        const double variance = x.dot(u);
        double g = 0.0;
        if (variance > 0.0) {
          g = catoni_over(s, variance, delta_l, [&](const SampleType& t) {
            return phi(t.context, t.action).dot(u);
          });
        }
        gap[i][j] = g;
        gap[j][i] = -g;
      }
    }
    RoundRecord rr;
    rr.round = l;
    rr.epsilon = eps;
    rr.samples = n;
    rr.design_value = dv.value;
    summarize_allocation(instance, dv.allocation, rr);
    std::vector<std::size_t> next;
    for (std::size_t j = 0; j < k; ++j) {
      double worst = -INFINITY;
      for (std::size_t i = 0; i < k; ++i) {
        if (i != j) worst = std::max(worst, gap[i][j]);
      }
      rr.gaps.push_back({active[j], worst});
      if (!(worst > eps)) next.push_back(active[j]);
    }
    if (next.empty()) {
      // Estimates inconsistent beyond their widths; keep the least dominated.
      std::size_t best = 0;
      for (std::size_t j = 1; j < k; ++j) {
        if (rr.gaps[j].gap < rr.gaps[best].gap) best = j;
      }
      next.push_back(active[best]);
    }
    rr.active = next;
    rr.pivot = next.front();
    record.rounds.push_back(std::move(rr));
    std::vector<std::vector<double>> kept;
    for (std::size_t i = 0; i < k; ++i) {
      if (std::find(next.begin(), next.end(), active[i]) == next.end()) continue;
      std::vector<double> row;
      for (std::size_t j = 0; j < k; ++j) {
        if (std::find(next.begin(), next.end(), active[j]) != next.end()) row.push_back(gap[i][j]);
      }
      kept.push_back(std::move(row));
    }
    last_gap = std::move(kept);
    active = std::move(next);
  }
  if (until_one && active.size() > 1) {
    record.failed = true;
    record.failure = std::to_string(active.size()) + " policies survive the round cap";
  }
  // Among survivors return the one whose worst estimated deficit is smallest.
  std::size_t pick = 0;
  if (active.size() > 1 && last_gap.size() == active.size()) {
    double best = INFINITY;
    for (std::size_t j = 0; j < active.size(); ++j) {
      double worst = -INFINITY;
      for (std::size_t i = 0; i < active.size(); ++i) {
        if (i != j) worst = std::max(worst, last_gap[i][j]);
      }
      if (worst < best) {
        best = worst;
        pick = j;
      }
    }
  }
  return finish(policies, active[pick], std::move(record), start);
}

LearnerResult nonelim_rage(const BanditInstance& instance, const PolicyClass& policies,
                           const LearnerConfig& config, Rng& rng) {
  check_config(config);
  require(!policies.feature_map() || policies.feature_map()->is_one_hot(),
          ErrorKind::InvalidArgument, "non-elimination RAGE works with one-hot features");
  const auto start = Clock::now();
  RunRecord record;
  record.learner = "nonelim_rage";
  const std::size_t A = instance.num_actions();
  const double P = static_cast<double>(policies.size());
  const ContextWeights weights = ContextWeights::from_instance(instance);
  const double width = config.strict ? 28.0 : config.width_multiplier;
  FwConfig fw = config.fw;
  fw.strict = fw.strict || config.strict;
  std::size_t pivot = 0;
  // gap[pi] estimates V(pivot) - V(pi) from the previous round.
  std::vector<double> prev_gap(policies.size(), 0.0);
  const int rounds = policies.size() > 1 ? rounds_for(config.epsilon) : 0;

  for (int l = 1; l <= rounds; ++l) {
    const double eps = std::ldexp(1.0, -l);
    const double delta_l = config.delta / (2.0 * l * l * P);
    RoundParams params;
    params.epsilon = eps;
    params.delta = delta_l;
    params.eta = smoothing_eta(eps, A, config.c1);
    params.pivot = pivot;
    params.gap_scale = 0.25;
    // width * sqrt(2 x log(1/delta_l) / n) = min_gamma gamma x + log_coef / (gamma n).
    params.log_coef = width * width * std::log(1.0 / delta_l) / 2.0;
    params.previous_gap = [&prev_gap](std::size_t i) { return prev_gap[i]; };

    RoundRecord rr;
    rr.round = l;
    rr.epsilon = eps;
    rr.pivot = pivot;
    const FwResult sol = fw_gd(policies, params, weights, fw);
    rr.certificate = sol.certificate;
    if (!sol.success) {
      record.failed = true;
      record.failure = "design solve failed in round " + std::to_string(l);
      record.rounds.push_back(std::move(rr));
      break;
    }
    const Allocation w =
        allocation_from_lambda_gamma(policies, sol.iterate.support, pivot, params.eta);
    const std::uint64_t n = ceil_count(sol.iterate.n);
    rr.samples = n;
    rr.design_value = sol.certificate.dual;
    summarize_allocation(instance, w, rr);
    const RoundSamples s = draw_round(instance, w, n, rng, false);

    // Catoni of <phi_ref - phi_pi, O_t>; under one-hot features this is
    // r / p * (1{ref(c) = a} - 1{pi(c) = a}).
    auto gaps_against = [&](std::size_t ref) {
      std::vector<double> g(policies.size(), 0.0);
      for (std::size_t i = 0; i < policies.size(); ++i) {
        if (i == ref) continue;
        const double variance = combinatorial_norm(weights, w, policies[i], policies[ref]);
        if (!(variance > 0.0)) continue;
        g[i] = catoni_over(s, variance, delta_l, [&](const SampleType& t) {
          const int sign = (policies[ref](t.context) == t.action ? 1 : 0) -
                           (policies[i](t.context) == t.action ? 1 : 0);
          return sign / t.propensity;
        });
      }
      return g;
    };
    const std::vector<double> against_old = gaps_against(pivot);
    std::size_t next = 0;
    for (std::size_t i = 1; i < policies.size(); ++i) {
      if (against_old[i] < against_old[next]) next = i;
    }
    for (std::size_t i = 0; i < policies.size(); ++i) rr.gaps.push_back({i, against_old[i]});
    record.rounds.push_back(std::move(rr));
    pivot = next;
    prev_gap = gaps_against(pivot);
  }
  return finish(policies, pivot, std::move(record), start);
}

namespace {

// argmin over policies off `support` of the selection objective
//   IPS(pi, pivot; gamma0) / n + E_D[gamma0 (1/p_{pi(c)} + 1/p_{pivot(c)}) 1{pi(c) != pivot(c)}]
//   + log_coef / (gamma0 n),
// written as an argmax of negated cost vectors.
CostWeightedDataset selection_to_csc(const PolicyClass& policies, std::size_t pivot,
                                     const RewardTable& table, const Allocation& w,
                                     double gamma0, double log_coef,
                                     const ContextWeights& weights) {
  const std::size_t A = policies.num_actions();
  const Policy& pv = policies[pivot];
  CostWeightedDataset data(A);
  for (Eigen::Index c = 0; c < table.reward_sum.rows(); ++c) {
    if (table.reward_sum.row(c).isZero(0.0)) continue;
    const auto ctx = static_cast<Context>(c);
    auto ips = [&](Eigen::Index a) {
      return table.count(c, a) > 0.0 ? table.reward_sum(c, a) / (table.propensity(c, a) + gamma0)
                                     : 0.0;
    };
    const auto b = idx(pv(ctx));
    std::vector<double> cost(A, 0.0);
    for (std::size_t a = 0; a < A; ++a) {
      if (idx(a) != b) cost[a] = (ips(idx(a)) - ips(b)) / table.n;
    }
    data.add(ctx, std::move(cost));
  }
  for (const auto& e : weights.entries()) {
    const Context c = e.context;
    std::vector<double> cost(A, 0.0);
    for (std::size_t a = 0; a < A; ++a) {
      if (a != pv(c)) cost[a] = -e.weight * gamma0 * (1.0 / w(c, a) + 1.0 / w(c, pv(c)));
    }
    data.add(c, std::move(cost));
  }
  data.set_offset(-log_coef / (gamma0 * table.n));
  return data;
}

}  // namespace

LearnerResult coda(const BanditInstance& instance, const PolicyClass& policies,
                   const LearnerConfig& config, const OfflineDataset& offline,
                   ArgmaxOracle& oracle, Rng& rng) {
  check_config(config);
  require(&oracle.policies() == &policies || oracle.policies().size() == policies.size(),
          ErrorKind::InvalidArgument, "oracle searches a different class");
  const auto start = Clock::now();
  RunRecord record;
  record.learner = "coda";
  const std::size_t A = instance.num_actions();
  const double P = static_cast<double>(policies.size());
  const ContextWeights weights = offline.weights(instance.num_contexts());
  FwConfig fw = config.fw;
  fw.strict = fw.strict || config.strict;

  std::size_t pivot = 0;
  RewardTable prev;
  std::vector<WeightedPolicy> prev_support;
  double prev_gamma0 = 0.0;
  const int rounds = policies.size() > 1 ? rounds_for(config.epsilon) : 0;

  for (int l = 1; l <= rounds; ++l) {
    const double eps = std::ldexp(1.0, -l);
    const double delta_l = config.delta / (static_cast<double>(l) * l * P * P);
    RoundParams params;
    params.epsilon = eps;
    params.delta = delta_l;
    params.eta = smoothing_eta(eps, A, config.c1);
    params.pivot = pivot;
    params.log_coef = std::log(1.0 / delta_l);
    if (prev.n > 0.0) {
      params.rewards = &prev;
      params.gamma0_prev = prev_gamma0;
      for (const auto& w : prev_support) params.previous_support.push_back(w.policy);
      params.previous_gap = [&, pivot](std::size_t i) {
        double gamma = prev_gamma0;
        for (const auto& w : prev_support) {
          if (w.policy == i) gamma = w.gamma;
        }
        return ips_gap_estimate(prev, policies[i], policies[pivot], gamma) / prev.n;
      };
    }

    RoundRecord rr;
    rr.round = l;
    rr.epsilon = eps;
    rr.pivot = pivot;
    const FwResult sol = fw_gd(policies, params, weights, fw, &oracle);
    rr.certificate = sol.certificate;
    rr.oracle_calls = sol.oracle_calls;
    if (!sol.success) {
      record.failed = true;
      record.failure = "design solve failed in round " + std::to_string(l);
      record.rounds.push_back(std::move(rr));
      break;
    }
    const auto& support = sol.iterate.support;
    const Allocation w = allocation_from_lambda_gamma(policies, support, pivot, params.eta);
    const std::uint64_t n = ceil_count(sol.iterate.n);
    rr.samples = n;
    rr.design_value = sol.certificate.dual;
    summarize_allocation(instance, w, rr);
    const RoundSamples s = draw_round(instance, w, n, rng, true);
    RewardTable table =
        RewardTable::from_batch(s.batch, instance.num_contexts(), instance.num_actions());

    const double gamma0 = sol.iterate.gamma0;
    auto objective = [&](std::size_t i, double gamma) {
      return ips_gap_estimate(table, policies[i], policies[pivot], gamma) / table.n +
             gamma * combinatorial_norm(weights, w, policies[i], policies[pivot]) +
             params.log_coef / (gamma * table.n);
    };
    std::size_t best = pivot;
    double best_value = INFINITY;
    auto consider = [&](std::size_t i, double v) {
      if (v < best_value || (v == best_value && i < best)) {
        best_value = v;
        best = i;
      }
    };
    std::vector<std::size_t> tracked;
    for (const auto& sp : support) {
      consider(sp.policy, objective(sp.policy, sp.gamma));
      tracked.push_back(sp.policy);
      rr.gaps.push_back({sp.policy, ips_gap_estimate(table, policies[sp.policy],
                                                     policies[pivot], sp.gamma) / table.n});
    }
    std::sort(tracked.begin(), tracked.end());
    if (tracked.size() < policies.size()) {
      const CostWeightedDataset data =
          selection_to_csc(policies, pivot, table, w, gamma0, params.log_coef, weights);
      const std::vector<Context> ctx = data.contexts();
      const OracleResult r = constrained_argmax_avoiding(oracle, data, tracked, ctx);
      rr.oracle_calls += 1 + tracked.size() * ctx.size();
      consider(r.index, objective(r.index, gamma0));
    }
    record.rounds.push_back(std::move(rr));
    prev = std::move(table);
    prev_support = support;
    prev_gamma0 = gamma0;
    pivot = best;
  }
  return finish(policies, pivot, std::move(record), start);
}

LearnerResult regret_baseline(const BanditInstance& instance, const PolicyClass& policies,
                              const LearnerConfig& config, Rng& rng) {
  check_config(config);
  const auto start = Clock::now();
  RunRecord record;
  record.learner = "regret_baseline";
  const std::size_t C = instance.num_contexts();
  const std::size_t A = instance.num_actions();
  const std::size_t K = policies.size();
  if (K == 1) return finish(policies, 0, std::move(record), start);
  const Allocation uniform = Allocation::uniform(C, A);
  const double Ad = static_cast<double>(A);
  // sum[i] = sum over samples of A r 1{pi_i(c) = a}; V-hat = sum / t.
  std::vector<double> sum(K, 0.0);
  std::vector<std::vector<std::size_t>> agree(C * A);
  for (std::size_t i = 0; i < K; ++i) {
    for (Context c = 0; c < C; ++c) agree[c * A + policies[i](c)].push_back(i);
  }
  const std::uint64_t cap = 2'000'000'000ULL;
  std::uint64_t t = 0;
  std::size_t leader = 0;
  while (t < cap) {
    const Interaction x = sample_interaction(instance, uniform, rng);
    ++t;
    if (x.reward != 0.0) {
      for (std::size_t i : agree[x.context * A + x.action]) sum[i] += Ad * x.reward;
    }
    const double td = static_cast<double>(t);
    const double w =
        Ad * std::sqrt(std::log(2.0 * K * td * (td + 1.0) / config.delta) / (2.0 * td));
    leader = static_cast<std::size_t>(std::max_element(sum.begin(), sum.end()) - sum.begin());
    double runner = -INFINITY;
    for (std::size_t i = 0; i < K; ++i) {
      if (i != leader) runner = std::max(runner, sum[i]);
    }
    if ((sum[leader] - runner) / td > 2.0 * w) break;
  }
  RoundRecord rr;
  rr.round = 1;
  rr.samples = t;
  rr.pivot = leader;
  summarize_allocation(instance, uniform, rr);
  for (std::size_t i = 0; i < K; ++i) rr.gaps.push_back({i, (sum[leader] - sum[i]) / static_cast<double>(t)});
  record.rounds.push_back(std::move(rr));
  if (t >= cap) {
    record.failed = true;
    record.failure = "sample cap reached before separation";
  }
  return finish(policies, leader, std::move(record), start);
}

LearnerResult per_context_bai_baseline(const BanditInstance& instance,
                                       const LearnerConfig& config, Rng& rng) {
  check_config(config);
  const auto start = Clock::now();
  RunRecord record;
  record.learner = "per_context_bai";
  const std::size_t C = instance.num_contexts();
  const std::size_t A = instance.num_actions();
  std::size_t live = 0;
  for (Context c = 0; c < C; ++c) live += instance.nu(c) > 0.0 ? 1 : 0;
  const double delta_c = config.delta / static_cast<double>(std::max<std::size_t>(live, 1));
  std::vector<double> sum(C * A, 0.0);
  std::vector<double> pulls(C * A, 0.0);
  std::vector<std::size_t> next_arm(C, 0);
  std::vector<bool> done(C, false);
  std::vector<Action> best(C, 0);
  for (Context c = 0; c < C; ++c) done[c] = instance.nu(c) == 0.0 || A == 1;
  std::size_t remaining = 0;
  for (Context c = 0; c < C; ++c) remaining += done[c] ? 0 : 1;
  const double Ad = static_cast<double>(A);
  // Anytime Hoeffding width for one arm with k pulls.
  auto width = [&](double k) {
    return std::sqrt(std::log(4.0 * Ad * k * k / delta_c) / (2.0 * k));
  };
  const std::uint64_t cap = 2'000'000'000ULL;
  std::uint64_t t = 0;
  while (remaining > 0 && t < cap) {
    const Context c = instance.sample_context(rng);
    const Action a = next_arm[c];
    next_arm[c] = (a + 1) % A;
    const double r = instance.sample_reward(c, a, rng);
    ++t;
    if (done[c]) continue;
    sum[c * A + a] += r;
    pulls[c * A + a] += 1.0;
    if (next_arm[c] != 0) continue;
    // Stop once the leader's lower bound clears every other upper bound
    // minus epsilon.
    Action lead = 0;
    for (Action b = 1; b < A; ++b) {
      if (sum[c * A + b] / pulls[c * A + b] > sum[c * A + lead] / pulls[c * A + lead]) lead = b;
    }
    const double k = pulls[c * A + lead];
    const double lcb = sum[c * A + lead] / k - width(k);
    bool separated = true;
    for (Action b = 0; b < A && separated; ++b) {
      if (b == lead) continue;
      const double kb = pulls[c * A + b];
      separated = lcb >= sum[c * A + b] / kb + width(kb) - config.epsilon;
    }
    if (separated) {
      done[c] = true;
      best[c] = lead;
      --remaining;
    }
  }
  for (Context c = 0; c < C; ++c) {
    if (!done[c] || instance.nu(c) == 0.0) {
      Action lead = 0;
      for (Action b = 1; b < A; ++b) {
        const double mb = pulls[c * A + b] > 0 ? sum[c * A + b] / pulls[c * A + b] : 0.0;
        const double ml = pulls[c * A + lead] > 0 ? sum[c * A + lead] / pulls[c * A + lead] : 0.0;
        if (mb > ml) lead = b;
      }
      best[c] = lead;
    }
  }
  // Index in the lexicographic trivial class (context 0 most significant).
  std::size_t index = 0;
  for (Context c = 0; c < C; ++c) index = index * A + best[c];
  RoundRecord rr;
  rr.round = 1;
  rr.epsilon = config.epsilon;
  rr.samples = t;
  rr.pivot = index;
  record.rounds.push_back(std::move(rr));
  if (remaining > 0) {
    record.failed = true;
    record.failure = "sample cap reached before every context stopped";
  }
  record.chosen = index;
  record.tau = t;
  record.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return {index, Policy(best), std::move(record)};
}

}  // namespace pacbandit

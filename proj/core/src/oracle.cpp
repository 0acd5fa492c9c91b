#include "pacbandit/oracle.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "pacbandit/error.hpp"

namespace pacbandit {

void CostWeightedDataset::add(Context context, std::vector<double> cost) {
  require(cost.size() == num_actions_, ErrorKind::InvalidArgument,
          "cost row must have one entry per action");
  for (double v : cost) {
    require(!std::isnan(v), ErrorKind::InvalidArgument, "cost entries must not be NaN");
  }
  items_.push_back({context, std::move(cost)});
}

double CostWeightedDataset::score(const Policy& policy) const {
  double s = 0.0;
  for (const auto& item : items_) s += item.cost[policy(item.context)];
  return s;
}

std::vector<Context> CostWeightedDataset::contexts() const {
  std::vector<Context> out;
  for (const auto& item : items_) {
    bool seen = false;
    for (Context c : out) seen = seen || c == item.context;
    if (!seen) out.push_back(item.context);
  }
  return out;
}

std::string CostWeightedDataset::to_csv() const {
  std::ostringstream out;
  out << "context";
  for (std::size_t a = 0; a < num_actions_; ++a) out << ",cost_" << a;
  out << '\n';
  char buf[32];
  for (const auto& item : items_) {
    out << item.context;
    for (double v : item.cost) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

void OracleBudget::charge_c_amo() {
  const auto made = c_amo_calls_.fetch_add(1, std::memory_order_relaxed) + 1;
  if (cap_ && made > *cap_) {
    fail(ErrorKind::SolverFailure,
         "constrained oracle budget of " + std::to_string(*cap_) + " calls exhausted");
  }
}

EnumerationOracle::EnumerationOracle(const PolicyClass& policies, OracleBudget* budget)
    : policies_(policies), budget_(budget) {}

std::vector<double> EnumerationOracle::scores(const CostWeightedDataset& data) const {
  require(policies_.size() > 0, ErrorKind::InvalidArgument, "oracle needs a nonempty class");
  require(data.num_actions() == policies_.num_actions(), ErrorKind::InvalidArgument,
          "cost rows do not match the class action count");
  const std::size_t C = policies_.num_contexts();
  const std::size_t A = policies_.num_actions();
  std::vector<double> table(C * A, 0.0);
  for (const auto& item : data.items()) {
    require(item.context < C, ErrorKind::InvalidArgument, "cost item context out of range");
    for (std::size_t a = 0; a < A; ++a) table[item.context * A + a] += item.cost[a];
  }
  std::vector<Context> used;
  for (Context c = 0; c < C; ++c) {
    for (std::size_t a = 0; a < A; ++a) {
      if (table[c * A + a] != 0.0) {
        used.push_back(c);
        break;
      }
    }
  }
  std::vector<double> out(policies_.size(), 0.0);
  for (std::size_t i = 0; i < policies_.size(); ++i) {
    const Policy& pi = policies_[i];
    double s = 0.0;
    for (Context c : used) s += table[c * A + pi(c)];
    out[i] = s;
  }
  return out;
}

OracleResult EnumerationOracle::amo(const CostWeightedDataset& data) {
  if (budget_) budget_->charge_amo();
  const auto s = scores(data);
  OracleResult best{0, s[0]};
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i] > best.score) best = {i, s[i]};
  }
  return best;
}

std::optional<OracleResult> EnumerationOracle::c_amo(const CostWeightedDataset& data,
                                                     const ConstrainedQuery& query) {
  if (budget_) budget_->charge_c_amo();
  const auto s = scores(data);
  std::optional<OracleResult> best;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (query.exclude && policies_[i](query.exclude->context) == query.exclude->action) continue;
    if (s[i] > query.cap) continue;
    if (s[i] == query.cap && query.after_index_at_cap && i <= *query.after_index_at_cap) continue;
    if (!best || s[i] > best->score) best = OracleResult{i, s[i]};
  }
  return best;
}

OracleResult amo(const PolicyClass& policies, const CostWeightedDataset& data) {
  EnumerationOracle oracle(policies);
  return oracle.amo(data);
}

std::optional<OracleResult> c_amo(const PolicyClass& policies, const CostWeightedDataset& data,
                                  double cap) {
  EnumerationOracle oracle(policies);
  ConstrainedQuery query;
  query.cap = cap;
  return oracle.c_amo(data, query);
}

OracleResult constrained_argmax_avoiding(ArgmaxOracle& oracle, const CostWeightedDataset& data,
                                         const std::vector<std::size_t>& forbidden,
                                         std::span<const Context> contexts) {
  const PolicyClass& policies = oracle.policies();
  std::vector<bool> banned(policies.size(), false);
  std::size_t banned_count = 0;
  for (std::size_t i : forbidden) {
    require(i < policies.size(), ErrorKind::InvalidArgument, "forbidden index out of range");
    if (!banned[i]) ++banned_count;
    banned[i] = true;
  }
  require(banned_count < policies.size(), ErrorKind::InvalidArgument,
          "every policy of the class is forbidden");
  auto ranks_above = [](const OracleResult& x, const OracleResult& y) {
    return x.score > y.score || (x.score == y.score && x.index < y.index);
  };
  OracleResult current = oracle.amo(data);
  while (banned[current.index]) {
    std::optional<OracleResult> next;
    const Policy& pi = policies[current.index];
    for (Context c : contexts) {
      ConstrainedQuery query;
      query.cap = current.score;
      query.exclude = Exclusion{c, pi(c)};
      query.after_index_at_cap = current.index;
      const auto r = oracle.c_amo(data, query);
      if (r && (!next || ranks_above(*r, *next))) next = r;
    }
    require(next.has_value(), ErrorKind::InvalidArgument,
            "no policy outside the forbidden set is reachable through the given contexts");
    current = *next;
  }
  return current;
}

CostWeightedDataset gradient_to_csc(const PolicyClass& policies, const CscInputs& inputs,
                                    const ContextWeights& weights) {
  const std::size_t A = policies.num_actions();
  const Policy& pivot = policies[inputs.pivot];
  CostWeightedDataset data(A);
  double offset = inputs.gamma0 > 0.0 ? inputs.log_coef / (inputs.gamma0 * inputs.n) : 0.0;

  if (inputs.rewards != nullptr && inputs.rewards->n > 0.0) {
    const RewardTable& t = *inputs.rewards;
    const double scale = inputs.gap_scale / t.n;
    for (Eigen::Index c = 0; c < t.reward_sum.rows(); ++c) {
      if (t.reward_sum.row(c).isZero(0.0)) continue;
      const auto ctx = static_cast<Context>(c);
      const auto b = static_cast<Eigen::Index>(pivot(ctx));
      auto ips = [&](Eigen::Index a) {
        return t.count(c, a) > 0.0 ? t.reward_sum(c, a) / (t.propensity(c, a) + inputs.gamma0_prev)
                                   : 0.0;
      };
      const double pivot_term = ips(b);
      std::vector<double> cost(A, 0.0);
      for (std::size_t a = 0; a < A; ++a) {
        if (static_cast<Eigen::Index>(a) != b) {
          cost[a] = scale * (ips(static_cast<Eigen::Index>(a)) - pivot_term);
        }
      }
      data.add(ctx, std::move(cost));
    }
  }

  if (inputs.gamma0 > 0.0) {
    std::vector<double> root(A);
    for (const auto& e : weights.entries()) {
      const Context c = e.context;
      std::fill(root.begin(), root.end(), 0.0);
      double base = 0.0;
      double dis = 0.0;
      for (const auto& w : inputs.support) {
        const double lg = w.lambda * w.gamma;
        base += lg;
        const Action a = policies[w.policy](c);
        if (a != pivot(c)) {
          root[a] += lg;
          dis += lg;
        }
      }
      root[pivot(c)] += dis;
      double S = 0.0;
      double inv_sum = 0.0;
      for (auto& v : root) {
        v = std::sqrt(v + inputs.eta * base);
        S += v;
        inv_sum += 1.0 / v;
      }
      const double scale = e.weight * S * inputs.gamma0;
      std::vector<double> cost(A, 0.0);
      for (std::size_t a = 0; a < A; ++a) {
        if (a != pivot(c)) cost[a] = scale * (1.0 / root[a] + 1.0 / root[pivot(c)]);
      }
      if (inputs.eta > 0.0) offset += scale * inputs.eta * inv_sum;
      data.add(c, std::move(cost));
    }
  }
  data.set_offset(offset);
  return data;
}

}  // namespace pacbandit

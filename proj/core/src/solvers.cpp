#include "pacbandit/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"

#include "pacbandit/error.hpp"

namespace pacbandit {

double smoothing_eta(double epsilon, std::size_t num_actions, double c1) {
  require(epsilon > 0.0 && c1 > 0.0 && c1 <= 1.0, ErrorKind::InvalidArgument,
          "smoothing needs eps > 0 and c1 in (0, 1]");
  const double A = static_cast<double>(num_actions);
  return c1 * epsilon * epsilon / (A * A * A * A);
}

GammaBox gamma_box(const RoundParams& params, std::size_t num_actions, double n) {
  require(n > 0.0 && params.log_coef > 0.0, ErrorKind::InvalidArgument,
          "gamma box needs n > 0 and a positive log coefficient");
  if (params.eta <= 0.0) return {0.0, std::numeric_limits<double>::infinity()};
  const double A = static_cast<double>(num_actions);
  return {std::sqrt(params.eta * params.log_coef / n) / 3.0,
          std::sqrt(params.log_coef / (A * A * params.eta * n))};
}

double DualIterate::lambda(std::size_t policy) const {
  for (const auto& w : support) {
    if (w.policy == policy) return w.lambda;
  }
  return 0.0;
}

double DualIterate::gamma(std::size_t policy) const {
  for (const auto& w : support) {
    if (w.policy == policy) return w.gamma;
  }
  return gamma0;
}

std::string certificate_to_json(const GapCertificate& certificate) {
  nlohmann::json j;
  j["primal"] = certificate.primal;
  j["dual"] = certificate.dual;
  j["gap"] = certificate.gap;
  j["fw_gap"] = certificate.fw_gap;
  j["iterations"] = certificate.iterations;
  return j.dump();
}

void validate_iterate(const DualIterate& iterate, const RoundParams& params,
                      std::size_t num_actions, double slack) {
  require(!iterate.support.empty(), ErrorKind::InvariantViolation, "lambda has empty support");
  double total = 0.0;
  for (const auto& w : iterate.support) {
    require(w.lambda >= 0.0, ErrorKind::InvariantViolation, "lambda must be nonnegative");
    total += w.lambda;
  }
  require(std::abs(total - 1.0) <= 1e-9, ErrorKind::InvariantViolation,
          "lambda is off the simplex (sum " + std::to_string(total) + ")");
  const GammaBox box = gamma_box(params, num_actions, iterate.n);
  auto inside = [&](double g) {
    return g >= box.min * (1.0 - slack) && g <= box.max * (1.0 + slack) && g > 0.0;
  };
  for (const auto& w : iterate.support) {
    require(inside(w.gamma), ErrorKind::InvariantViolation,
            "gamma of policy " + std::to_string(w.policy) + " = " + std::to_string(w.gamma) +
                " lies outside [" + std::to_string(box.min) + ", " + std::to_string(box.max) +
                "]");
  }
  require(params.eta <= 0.0 || inside(iterate.gamma0), ErrorKind::InvariantViolation,
          "off-support gamma lies outside the box");
}

namespace {

// Per-context quantities of the allocation induced by an iterate:
// inv(c, a) = 1 / s_{c,a} with s the normalized square-root scores.
struct Induced {
  std::vector<Context> context;
  std::vector<double> weight;
  std::vector<double> inv;  // row-major over entries x actions
  double design = 0.0;      // E_c[(sum_a sqrt(B_ca))^2]
  double eta_part = 0.0;    // eta * E_c[sum_a 1/s_ca]
};

Induced induce(const PolicyClass& policies, const DualIterate& iterate, double eta,
               std::size_t pivot, const ContextWeights& weights) {
  const std::size_t A = policies.num_actions();
  const Policy& pv = policies[pivot];
  Induced out;
  const auto& entries = weights.entries();
  out.context.reserve(entries.size());
  out.weight.reserve(entries.size());
  out.inv.resize(entries.size() * A);
  std::vector<double> root(A);
  for (std::size_t e = 0; e < entries.size(); ++e) {
    const Context c = entries[e].context;
    out.context.push_back(c);
    out.weight.push_back(entries[e].weight);
    std::fill(root.begin(), root.end(), 0.0);
    double base = 0.0;
    double dis = 0.0;
    for (const auto& w : iterate.support) {
      const double lg = w.lambda * w.gamma;
      base += lg;
      const Action a = policies[w.policy](c);
      if (a != pv(c)) {
        root[a] += lg;
        dis += lg;
      }
    }
    root[pv(c)] += dis;
    double S = 0.0;
    for (auto& v : root) {
      v = std::sqrt(v + eta * base);
      S += v;
    }
    out.design += entries[e].weight * S * S;
    double inv_sum = 0.0;
    for (std::size_t a = 0; a < A; ++a) {
      const double v = S > 0.0 ? S / root[a] : std::numeric_limits<double>::infinity();
      out.inv[e * A + a] = v;
      inv_sum += v;
    }
    if (eta > 0.0) out.eta_part += entries[e].weight * eta * inv_sum;
  }
  return out;
}

// E_c[(1/s_{pi(c)} + 1/s_{pivot(c)}) 1{pi(c) != pivot(c)}].
double induced_norm(const Induced& ind, const Policy& pi, const Policy& pivot, std::size_t A) {
  double x = 0.0;
  for (std::size_t e = 0; e < ind.context.size(); ++e) {
    const Context c = ind.context[e];
    const Action a = pi(c);
    const Action b = pivot(c);
    if (a != b) x += ind.weight[e] * (ind.inv[e * A + a] + ind.inv[e * A + b]);
  }
  return x;
}

double previous_gap(const RoundParams& params, std::size_t policy) {
  return params.previous_gap ? params.previous_gap(policy) : 0.0;
}

struct Coordinate {
  double gradient;
  double primal;
};

Coordinate coordinate(const PolicyClass& policies, const DualIterate& iterate,
                      const RoundParams& params, const Induced& ind, std::size_t policy) {
  const double gamma = iterate.gamma(policy);
  const double x = induced_norm(ind, policies[policy], policies[params.pivot],
                                policies.num_actions());
  const double base = -params.gap_scale * previous_gap(params, policy) +
                      params.log_coef / (gamma * iterate.n);
  return {base + gamma * (x + ind.eta_part), base + gamma * x};
}

double h_from(const PolicyClass&, const DualIterate& iterate, const RoundParams& params,
              const Induced& ind) {
  double h = ind.design;
  for (const auto& w : iterate.support) {
    if (w.lambda == 0.0) continue;
    h += w.lambda * (-params.gap_scale * previous_gap(params, w.policy) +
                     params.log_coef / (w.gamma * iterate.n));
  }
  return h;
}

// Forwards to another oracle and counts the calls.
class CountingOracle final : public ArgmaxOracle {
 public:
  explicit CountingOracle(ArgmaxOracle& inner) : inner_(inner) {}
  const PolicyClass& policies() const override { return inner_.policies(); }
  OracleResult amo(const CostWeightedDataset& data) override {
    ++calls;
    return inner_.amo(data);
  }
  std::optional<OracleResult> c_amo(const CostWeightedDataset& data,
                                    const ConstrainedQuery& query) override {
    ++calls;
    ++constrained;
    return inner_.c_amo(data, query);
  }
  std::uint64_t calls = 0;
  std::uint64_t constrained = 0;

 private:
  ArgmaxOracle& inner_;
};

void clamp_to_box(DualIterate& it, const GammaBox& box) {
  for (auto& w : it.support) w.gamma = std::clamp(w.gamma, box.min, box.max);
}

}  // namespace

double eval_h(const PolicyClass& policies, const DualIterate& iterate, const RoundParams& params,
              const ContextWeights& weights) {
  validate_iterate(iterate, params, policies.num_actions());
  const Induced ind = induce(policies, iterate, params.eta, params.pivot, weights);
  return h_from(policies, iterate, params, ind);
}

double grad_lambda_h(const PolicyClass& policies, const DualIterate& iterate,
                     const RoundParams& params, const ContextWeights& weights,
                     std::size_t policy) {
  require(policy < policies.size(), ErrorKind::InvalidArgument, "policy index out of range");
  const Induced ind = induce(policies, iterate, params.eta, params.pivot, weights);
  return coordinate(policies, iterate, params, ind, policy).gradient;
}

std::vector<double> grad_lambda_h(const PolicyClass& policies, const DualIterate& iterate,
                                  const RoundParams& params, const ContextWeights& weights) {
  const Induced ind = induce(policies, iterate, params.eta, params.pivot, weights);
  std::vector<double> g(policies.size());
  for (std::size_t i = 0; i < policies.size(); ++i) {
    g[i] = coordinate(policies, iterate, params, ind, i).gradient;
  }
  return g;
}

GradientArgmax gradient_argmax(const PolicyClass& policies, const DualIterate& iterate,
                               const RoundParams& params, const ContextWeights& weights,
                               ArgmaxOracle* oracle) {
  const Induced ind = induce(policies, iterate, params.eta, params.pivot, weights);
  GradientArgmax out;
  out.gradient = -std::numeric_limits<double>::infinity();
  out.primal = -std::numeric_limits<double>::infinity();
  auto consider = [&](std::size_t i) {
    const Coordinate k = coordinate(policies, iterate, params, ind, i);
    if (k.gradient > out.gradient || (k.gradient == out.gradient && i < out.policy)) {
      out.gradient = k.gradient;
      out.policy = i;
    }
    out.primal = std::max(out.primal, k.primal);
  };
  if (oracle == nullptr) {
    for (std::size_t i = 0; i < policies.size(); ++i) consider(i);
    return out;
  }
  std::vector<std::size_t> tracked;
  for (const auto& w : iterate.support) tracked.push_back(w.policy);
  for (std::size_t i : params.previous_support) tracked.push_back(i);
  std::sort(tracked.begin(), tracked.end());
  tracked.erase(std::unique(tracked.begin(), tracked.end()), tracked.end());
  for (std::size_t i : tracked) consider(i);
  if (tracked.size() == policies.size()) return out;

  CscInputs in;
  in.pivot = params.pivot;
  in.support = iterate.support;
  in.gamma0 = iterate.gamma0;
  in.eta = params.eta;
  in.log_coef = params.log_coef;
  in.n = iterate.n;
  in.rewards = params.rewards;
  in.gamma0_prev = params.gamma0_prev;
  in.gap_scale = params.gap_scale;
  const CostWeightedDataset data = gradient_to_csc(policies, in, weights);
  CountingOracle counting(*oracle);
  const std::vector<Context> contexts = data.contexts();
  const OracleResult r = constrained_argmax_avoiding(counting, data, tracked, contexts);
  out.oracle_calls = counting.calls;
  out.constrained_calls = counting.constrained;
  out.tracked = tracked.size();
  out.contexts = contexts.size();
  consider(r.index);
  return out;
}

double primal_value(const PolicyClass& policies, const DualIterate& iterate,
                    const RoundParams& params, const ContextWeights& weights,
                    std::size_t* argmax) {
  const Induced ind = induce(policies, iterate, params.eta, params.pivot, weights);
  double best = -std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (std::size_t i = 0; i < policies.size(); ++i) {
    const double v = coordinate(policies, iterate, params, ind, i).primal;
    if (v > best) {
      best = v;
      arg = i;
    }
  }
  if (argmax) *argmax = arg;
  return best;
}

namespace {

GdResult gd_from(const PolicyClass& policies, DualIterate it, const RoundParams& params,
                 const ContextWeights& weights, const GammaBox& box, double kappa,
                 int max_iterations) {
  const Policy& pv = policies[params.pivot];
  const std::size_t A = policies.num_actions();
  clamp_to_box(it, box);
  Induced ind = induce(policies, it, params.eta, params.pivot, weights);
  double h = h_from(policies, it, params, ind);
  GdResult out{it, h, 0, false};
  const double stop = kappa / 1000.0;
  for (int k = 1; k <= max_iterations; ++k) {
    for (auto& w : it.support) {
      const double D = induced_norm(ind, policies[w.policy], pv, A) + ind.eta_part;
      const double g = D > 0.0 ? std::sqrt(params.log_coef / (it.n * D)) : box.max;
      w.gamma = std::clamp(g, box.min, box.max);
    }
    ind = induce(policies, it, params.eta, params.pivot, weights);
    const double next = h_from(policies, it, params, ind);
    out.iterations = k;
    const double gain = h - next;
    if (next <= h) {
      out.iterate = it;
      out.h = next;
    }
    h = next;
    if (gain <= std::max(stop, 1e-13 * std::abs(h))) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace

GdResult gd_gamma(const PolicyClass& policies, const DualIterate& iterate,
                  const RoundParams& params, const ContextWeights& weights, double kappa,
                  const GdConfig& config) {
  require(kappa > 0.0, ErrorKind::InvalidArgument, "kappa must be positive");
  const GammaBox box = gamma_box(params, policies.num_actions(), iterate.n);
  GdResult best = gd_from(policies, iterate, params, weights, box, kappa, config.max_iterations);
  if (config.multi_start && std::isfinite(box.max)) {
    for (double start : {box.min, box.max}) {
      DualIterate it = iterate;
      for (auto& w : it.support) w.gamma = start;
      GdResult r = gd_from(policies, it, params, weights, box, kappa, config.max_iterations);
      if (r.h < best.h) best = std::move(r);
    }
  }
  return best;
}

double fw_smoothness(const RoundParams& params, std::size_t num_actions, double n) {
  const GammaBox box = gamma_box(params, num_actions, n);
  const double A = static_cast<double>(num_actions);
  return A * A * std::pow((1.0 + params.eta) * box.max, 2.5) /
         (std::pow(params.eta, 1.5) * box.min * box.min);
}

FwResult fw_gd_fixed_n(const PolicyClass& policies, const RoundParams& params,
                       const ContextWeights& weights, double n, const FwConfig& config,
                       ArgmaxOracle* oracle) {
  require(params.eta > 0.0, ErrorKind::InvalidArgument, "fw-gd needs eta > 0");
  require(params.pivot < policies.size(), ErrorKind::InvalidArgument, "pivot out of range");
  const std::size_t A = policies.num_actions();
  const GammaBox box = gamma_box(params, A, n);
  const double eps = params.epsilon;
  GdConfig gd = config.gd;
  gd.multi_start = gd.multi_start || config.strict;

  DualIterate it;
  it.n = n;
  it.gamma0 = box.max;
  it.support.push_back({params.pivot, 1.0, box.max});
  it = gd_gamma(policies, it, params, weights, eps, gd).iterate;

  FwResult out;
  out.solves = 1;
  const double L_strict = config.strict ? fw_smoothness(params, A, n) : 0.0;
  double L_est = 1.0;
  bool rejected = false;
  for (int t = 0;; ++t) {
    const GradientArgmax ga = gradient_argmax(policies, it, params, weights, oracle);
    out.oracle_calls += ga.oracle_calls;
    out.max_calls_per_iteration = std::max(out.max_calls_per_iteration, ga.oracle_calls);
    if (ga.constrained_calls > ga.tracked * ga.contexts) out.oracle_budget_ok = false;
    const Induced ind = induce(policies, it, params.eta, params.pivot, weights);
    const double h = h_from(policies, it, params, ind);
    const double g = ga.gradient - h;
    out.iterate = it;
    out.certificate = {ga.primal, h, ga.primal - h, g, t};
    const double kappa = eps / ((t + 1.0) * (t + 1.0));
    if (config.early_reject && h - kappa > eps) {
      rejected = true;
      break;
    }
    if (h <= eps && ga.primal - h <= config.certificate_fraction * eps) break;
    if (t >= config.max_iterations) break;
    if (!(g > 1e-15 * std::max(1.0, std::abs(h)))) break;

    const double lam_t = it.lambda(ga.policy);
    const double dn = 2.0 * (1.0 - lam_t);
    if (dn <= 0.0) break;
    auto step_to = [&](double beta) {
      DualIterate next = it;
      bool found = false;
      for (auto& w : next.support) {
        w.lambda *= (1.0 - beta);
        if (w.policy == ga.policy) {
          w.lambda += beta;
          found = true;
        }
      }
      if (!found) next.support.push_back({ga.policy, beta, it.gamma0});
      std::erase_if(next.support, [](const WeightedPolicy& w) { return w.lambda <= 0.0; });
      return next;
    };
    // The adaptive step backtracks on phi(lambda) = min_gamma h(lambda, gamma),
    // which is concave with gradient equal to the gradient of h at the
    // minimizing gamma.
    GdResult next;
    if (config.strict) {
      next = gd_gamma(policies, step_to(std::min(g / (L_strict * dn * dn), 1.0)), params,
                      weights, kappa, gd);
    } else {
      L_est = std::max(L_est / 2.0, 1e-300);
      for (int k = 0; k < 200; ++k) {
        const double beta = std::min(g / (L_est * dn * dn), 1.0);
        next = gd_gamma(policies, step_to(beta), params, weights, kappa, gd);
        if (next.h >= h + beta * g - 0.5 * beta * beta * L_est * dn * dn -
                          1e-12 * std::max(1.0, std::abs(h))) {
          break;
        }
        L_est *= 2.0;
      }
    }
    if (next.iterate.support.size() > it.support.size() + 1) out.support_growth_ok = false;
    it = std::move(next.iterate);
  }
  const auto& c = out.certificate;
  out.success = !rejected && c.dual <= eps && std::abs(c.gap) <= eps;
  return out;
}

FwResult fw_gd(const PolicyClass& policies, const RoundParams& params,
               const ContextWeights& weights, const FwConfig& config, ArgmaxOracle* oracle) {
  require(config.n0 >= 1.0 && config.n_max >= config.n0, ErrorKind::InvalidArgument,
          "fw-gd needs 1 <= n0 <= n_max");
  FwResult total;
  for (double n = config.n0; n <= config.n_max; n *= 2.0) {
    FwResult r = fw_gd_fixed_n(policies, params, weights, n, config, oracle);
    r.solves += total.solves;
    r.oracle_calls += total.oracle_calls;
    r.max_calls_per_iteration = std::max(r.max_calls_per_iteration, total.max_calls_per_iteration);
    r.support_growth_ok = r.support_growth_ok && total.support_growth_ok;
    r.oracle_budget_ok = r.oracle_budget_ok && total.oracle_budget_ok;
    total = std::move(r);
    if (total.success) return total;
  }
  return total;
}

}  // namespace pacbandit

#include "pacbandit/design.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>

#include "json.hpp"

#include "eigen_index.hpp"
#include "pacbandit/error.hpp"

namespace pacbandit {

ContextWeights ContextWeights::from_instance(const BanditInstance& instance) {
  std::vector<Entry> entries;
  for (Context c = 0; c < instance.num_contexts(); ++c) {
    if (instance.nu(c) > 0.0) entries.push_back({c, instance.nu(c)});
  }
  return ContextWeights(std::move(entries), instance.num_contexts());
}

ContextWeights ContextWeights::from_contexts(std::span<const Context> draws,
                                             std::size_t num_contexts) {
  require(!draws.empty(), ErrorKind::InvalidArgument, "empirical context law needs draws");
  std::vector<double> counts(num_contexts, 0.0);
  for (Context c : draws) {
    require(c < num_contexts, ErrorKind::InvalidArgument, "context draw out of range");
    counts[c] += 1.0;
  }
  std::vector<Entry> entries;
  const double n = static_cast<double>(draws.size());
  for (Context c = 0; c < num_contexts; ++c) {
    if (counts[c] > 0.0) entries.push_back({c, counts[c] / n});
  }
  return ContextWeights(std::move(entries), num_contexts);
}

double ContextWeights::weight(Context c) const {
  for (const auto& e : entries_) {
    if (e.context == c) return e.weight;
  }
  return 0.0;
}

std::string design_value_to_json(const DesignValue& value) {
  nlohmann::json j;
  j["value"] = value.value;
  j["argmax_policy"] = value.argmax_policy;
  j["argmax_partner"] = value.argmax_partner;
  j["lower_bound"] = value.lower_bound;
  j["converged"] = value.converged;
  j["iterations"] = value.iterations;
  j["clip_count"] = value.clip_count;
  nlohmann::json rows = nlohmann::json::array();
  const auto& p = value.allocation.rows();
  for (Eigen::Index c = 0; c < p.rows(); ++c) {
    std::vector<double> row(static_cast<std::size_t>(p.cols()));
    for (Eigen::Index a = 0; a < p.cols(); ++a) row[static_cast<std::size_t>(a)] = p(c, a);
    rows.push_back(std::move(row));
  }
  j["allocation"] = std::move(rows);
  return j.dump(2);
}

namespace {

// A family of convex functions F_k of the allocation; the solver minimizes
// max_k F_k over the product of simplices.
class MinimaxProblem {
 public:
  virtual ~MinimaxProblem() = default;
  virtual std::size_t size() const = 0;
  virtual void prepare(const Eigen::MatrixXd& p) = 0;
  virtual double value(std::size_t k, const Eigen::MatrixXd& p) const = 0;
  virtual void add_gradient(std::size_t k, const Eigen::MatrixXd& p, double scale,
                            Eigen::MatrixXd& grad) const = 0;
  // Lower bound on min_p sum_k q_k F_k(p), using `p` as the anchor if needed.
  virtual double lower_bound(const std::vector<double>& q, const Eigen::MatrixXd& p) = 0;
  // Minimizer of sum_k q_k F_k, exact or iterative; `p` holds a warm start
  // when it has the right shape.
  virtual bool best_response(const std::vector<double>&, Eigen::MatrixXd&) { return false; }
  // Whether best_response is exact, so sum_k q_k F_k(p) is itself a dual value.
  virtual bool exact_response() const { return false; }
};

struct Term {
  Context c;
  Action a;
  Action b;
  double weight;
};

// F_k(p) = sum over terms of weight * (1/p_{c,a} + 1/p_{c,b}).
class CombinatorialProblem final : public MinimaxProblem {
 public:
  CombinatorialProblem(std::vector<std::vector<Term>> items, std::size_t C, std::size_t A)
      : items_(std::move(items)), C_(C), A_(A) {}

  std::size_t size() const override { return items_.size(); }
  void prepare(const Eigen::MatrixXd&) override {}

  double value(std::size_t k, const Eigen::MatrixXd& p) const override {
    double v = 0.0;
    for (const auto& t : items_[k]) {
      v += t.weight * (1.0 / p(idx(t.c), idx(t.a)) +
                       1.0 / p(idx(t.c), idx(t.b)));
    }
    return v;
  }

  void add_gradient(std::size_t k, const Eigen::MatrixXd& p, double scale,
                    Eigen::MatrixXd& grad) const override {
    for (const auto& t : items_[k]) {
      const auto c = idx(t.c);
      const double pa = p(c, idx(t.a));
      const double pb = p(c, idx(t.b));
      grad(c, idx(t.a)) -= scale * t.weight / (pa * pa);
      grad(c, idx(t.b)) -= scale * t.weight / (pb * pb);
    }
  }

  double lower_bound(const std::vector<double>& q, const Eigen::MatrixXd&) override {
    const Eigen::MatrixXd B = mixed_weights(q);
    double lb = 0.0;
    for (Eigen::Index c = 0; c < B.rows(); ++c) {
      const double s = B.row(c).array().sqrt().sum();
      lb += s * s;
    }
    return lb;
  }

  // p_c proportional to the square roots of the mixed weights.
  bool exact_response() const override { return true; }

  bool best_response(const std::vector<double>& q, Eigen::MatrixXd& p) override {
    p = mixed_weights(q).array().sqrt();
    for (Eigen::Index c = 0; c < p.rows(); ++c) {
      const double s = p.row(c).sum();
      if (s > 0.0) {
        p.row(c) /= s;
      } else {
        p.row(c).setConstant(1.0 / static_cast<double>(A_));
      }
    }
    return true;
  }

 private:
  Eigen::MatrixXd mixed_weights(const std::vector<double>& q) const {
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(idx(C_), idx(A_));
    for (std::size_t k = 0; k < items_.size(); ++k) {
      if (q[k] <= 0.0) continue;
      for (const auto& t : items_[k]) {
        B(idx(t.c), idx(t.a)) += q[k] * t.weight;
        B(idx(t.c), idx(t.b)) += q[k] * t.weight;
      }
    }
    return B;
  }

  std::vector<std::vector<Term>> items_;
  std::size_t C_;
  std::size_t A_;
};

// F_k(p) = scale_k * x_k^T (A(w) + ridge I)^{-1} x_k with w = nu_c p_{c,a}.
class LinearProblem final : public MinimaxProblem {
 public:
  LinearProblem(const BanditInstance& instance, FeatureMap features,
                std::vector<Eigen::VectorXd> x, std::vector<double> scale, double ridge)
      : instance_(instance),
        features_(std::move(features)),
        x_(std::move(x)),
        scale_(std::move(scale)),
        ridge_(ridge) {}

  std::size_t size() const override { return x_.size(); }

  void prepare(const Eigen::MatrixXd& p) override {
    const Eigen::MatrixXd M = design_matrix(instance_, features_, Allocation(p), ridge_);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    if (ldlt.info() != Eigen::Success) fail(ErrorKind::Numeric, "design matrix factorization failed");
    Mx_.resize(x_.size());
    for (std::size_t k = 0; k < x_.size(); ++k) Mx_[k] = ldlt.solve(x_[k]);
  }

  double value(std::size_t k, const Eigen::MatrixXd&) const override {
    return scale_[k] * x_[k].dot(Mx_[k]);
  }

  void add_gradient(std::size_t k, const Eigen::MatrixXd&, double scale,
                    Eigen::MatrixXd& grad) const override {
    add_gradient_of(Mx_[k], scale * scale_[k], grad);
  }

  double lower_bound(const std::vector<double>& q, const Eigen::MatrixXd& p) override {
    prepare(p);
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(p.rows(), p.cols());
    double phi = 0.0;
    for (std::size_t k = 0; k < x_.size(); ++k) {
      if (q[k] <= 0.0) continue;
      phi += q[k] * value(k, p);
      add_gradient(k, p, q[k], grad);
    }
    double lb = phi;
    for (Eigen::Index c = 0; c < p.rows(); ++c) {
      lb += grad.row(c).minCoeff() - grad.row(c).dot(p.row(c));
    }
    return lb;
  }

  // Multiplicative updates p_{c,a} <- p_{c,a} sqrt(d_{c,a}) per row, where
  // -nu_c d_{c,a} is the gradient of the mixture; the fixed points are the
  // optimal designs.
  bool best_response(const std::vector<double>& q, Eigen::MatrixXd& p) override {
    const auto C = idx(instance_.num_contexts());
    const auto A = idx(instance_.num_actions());
    if (p.rows() != C || p.cols() != A) p = Eigen::MatrixXd::Constant(C, A, 1.0 / static_cast<double>(A));
    Eigen::MatrixXd grad(C, A);
    double prev = INFINITY;
    for (int it = 0; it < 200; ++it) {
      prepare(p);
      grad.setZero();
      double phi = 0.0;
      for (std::size_t k = 0; k < x_.size(); ++k) {
        if (q[k] <= 0.0) continue;
        phi += q[k] * value(k, p);
        add_gradient(k, p, q[k], grad);
      }
      for (Eigen::Index c = 0; c < C; ++c) {
        if (instance_.nu(static_cast<Context>(c)) == 0.0) continue;
        double s = 0.0;
        for (Eigen::Index a = 0; a < A; ++a) {
          p(c, a) = std::max(p(c, a) * std::sqrt(std::max(-grad(c, a), 0.0)), 1e-300);
          s += p(c, a);
        }
        p.row(c) /= s;
        for (Eigen::Index a = 0; a < A; ++a) p(c, a) = std::max(p(c, a), 1e-15);
        p.row(c) /= p.row(c).sum();
      }
      if (prev - phi <= 1e-12 * phi) break;
      prev = phi;
    }
    return true;
  }

 private:
  void add_gradient_of(const Eigen::VectorXd& Mx, double scale, Eigen::MatrixXd& grad) const {
    for (Context c = 0; c < instance_.num_contexts(); ++c) {
      const double nu = instance_.nu(c);
      if (nu == 0.0) continue;
      for (Action a = 0; a < instance_.num_actions(); ++a) {
        const double u = features_(c, a).dot(Mx);
        grad(idx(c), idx(a)) -= scale * nu * u * u;
      }
    }
  }

  const BanditInstance& instance_;
  FeatureMap features_;
  std::vector<Eigen::VectorXd> x_;
  std::vector<double> scale_;
  double ridge_;
  std::vector<Eigen::VectorXd> Mx_;
};

struct MinimaxResult {
  double value;
  std::size_t argmax;
  Eigen::MatrixXd p;
  double lower_bound;
  int iterations;
  std::size_t clip_count;
};

// Multiplicative-weights ascent on the item weights q for problems with a
// best response p(q). Each step gives a dual value (exact for closed-form
// responses, certified by linearization otherwise) and a primal candidate
// p(q). Returns the best dual value.
double dual_ascent(MinimaxProblem& problem, std::vector<double> q, MinimaxResult& best,
                   const SolverConfig& config) {
  const std::size_t K = q.size();
  Eigen::MatrixXd p = best.p;
  if (!problem.best_response(q, p)) return 0.0;
  const double floor = 1e-3 / static_cast<double>(K);
  std::vector<double> F(K);
  double lb = 0.0;
  const int T = std::max(1, config.max_iterations / 5);
  for (int t = 1; t <= T; ++t) {
    double total = 0.0;
    for (double& v : q) {
      v = std::max(v, floor);
      total += v;
    }
    for (double& v : q) v /= total;
    problem.best_response(q, p);
    problem.prepare(p);
    double dual = 0.0;
    double fmax = -INFINITY;
    double fmin = INFINITY;
    std::size_t arg = 0;
    for (std::size_t k = 0; k < K; ++k) {
      F[k] = problem.value(k, p);
      dual += q[k] * F[k];
      if (F[k] > fmax) {
        fmax = F[k];
        arg = k;
      }
      fmin = std::min(fmin, F[k]);
    }
    lb = std::max(lb, problem.exact_response() ? dual : problem.lower_bound(q, p));
    if (fmax < best.value) {
      best.value = fmax;
      best.argmax = arg;
      best.p = p;
    }
    if (!(fmax > fmin) || !std::isfinite(fmax)) break;
    if (best.value - lb <= 0.1 * config.tol * best.value) break;
    const double eta = 2.0 / std::sqrt(static_cast<double>(t));
    for (std::size_t k = 0; k < K; ++k) q[k] *= std::exp(eta * (F[k] - fmax) / (fmax - fmin));
  }
  return lb;
}

// Exponentiated-gradient descent on the rows of p using a subgradient of the
// pointwise max; returns the best iterate and a Lagrangian lower bound built
// from the empirical frequencies of the active item.
MinimaxResult solve_minimax(MinimaxProblem& problem, std::size_t C, std::size_t A,
                            const SolverConfig& config) {
  const std::size_t K = problem.size();
  Eigen::MatrixXd p = Eigen::MatrixXd::Constant(idx(C), idx(A),
                                                1.0 / static_cast<double>(A));
  MinimaxResult best{INFINITY, 0, p, 0.0, 0, 0};
  std::vector<double> active_counts(K, 0.0);
  Eigen::MatrixXd grad(idx(C), idx(A));
  const int T = std::max(1, config.max_iterations);
  for (int t = 1; t <= T; ++t) {
    problem.prepare(p);
    std::size_t arg = 0;
    double fmax = -INFINITY;
    for (std::size_t k = 0; k < K; ++k) {
      const double v = problem.value(k, p);
      if (v > fmax) {
        fmax = v;
        arg = k;
      }
    }
    if (fmax < best.value) {
      best.value = fmax;
      best.argmax = arg;
      best.p = p;
    }
    best.iterations = t;
    if (t == T) break;
    if (t > T / 2) active_counts[arg] += 1.0;
    grad.setZero();
    problem.add_gradient(arg, p, 1.0, grad);
    double gmax = 0.0;
    for (Eigen::Index c = 0; c < grad.rows(); ++c) {
      gmax = std::max(gmax, grad.row(c).maxCoeff() - grad.row(c).minCoeff());
    }
    if (!(gmax > 0.0) || !std::isfinite(gmax)) break;
    const double eta = config.step_scale / (std::sqrt(static_cast<double>(t)) * gmax);
    for (Eigen::Index c = 0; c < p.rows(); ++c) {
      const double shift = grad.row(c).minCoeff();
      for (Eigen::Index a = 0; a < p.cols(); ++a) p(c, a) *= std::exp(-eta * (grad(c, a) - shift));
      p.row(c) /= p.row(c).sum();
      bool clipped = false;
      for (Eigen::Index a = 0; a < p.cols(); ++a) {
        if (p(c, a) < config.clip) {
          p(c, a) = config.clip;
          clipped = true;
          ++best.clip_count;
        }
      }
      if (clipped) p.row(c) /= p.row(c).sum();
    }
  }
  double total = 0.0;
  for (double v : active_counts) total += v;
  if (total > 0.0) {
    for (double& v : active_counts) v /= total;
  } else {
    active_counts.assign(K, 0.0);
    active_counts[best.argmax] = 1.0;
  }
  double lb = problem.lower_bound(active_counts, best.p);
  std::vector<double> point(K, 0.0);
  point[best.argmax] = 1.0;
  lb = std::max(lb, problem.lower_bound(point, best.p));
  lb = std::max(lb, dual_ascent(problem, active_counts, best, config));
  best.lower_bound = std::max(0.0, lb);
  return best;
}

DesignValue finish(const MinimaxResult& r, std::size_t argmax_policy, std::size_t partner,
                   const SolverConfig& config) {
  DesignValue out;
  out.value = r.value;
  out.argmax_policy = argmax_policy;
  out.argmax_partner = partner;
  Eigen::MatrixXd p = r.p;
  for (Eigen::Index c = 0; c < p.rows(); ++c) p.row(c) /= p.row(c).sum();
  out.allocation = Allocation(std::move(p));
  out.lower_bound = std::min(r.lower_bound, r.value);
  out.converged = r.value - out.lower_bound <= config.tol * std::max(r.value, 1e-300);
  out.iterations = r.iterations;
  out.clip_count = r.clip_count;
  return out;
}

DesignValue trivial_design(std::size_t C, std::size_t A, std::size_t pi) {
  DesignValue out;
  out.argmax_policy = pi;
  out.argmax_partner = pi;
  out.allocation = Allocation::uniform(C, A);
  out.converged = true;
  return out;
}

}  // namespace

DesignValue rho_combinatorial(const BanditInstance& instance, const PolicyClass& policies,
                              double epsilon, const SolverConfig& config) {
  require(epsilon >= 0.0, ErrorKind::InvalidArgument, "epsilon must be nonnegative");
  const std::size_t star = optimal_policy(instance, policies);
  const std::size_t C = instance.num_contexts();
  const std::size_t A = instance.num_actions();
  if (policies.size() == 1) return trivial_design(C, A, star);
  const auto values = policy_values(instance, policies);
  const Policy& pstar = policies[star];
  std::vector<std::vector<Term>> items;
  std::vector<std::size_t> index;
  for (std::size_t i = 0; i < policies.size(); ++i) {
    if (i == star) continue;
    const double denom = std::max(values[star] - values[i], epsilon);
    const double inv = 1.0 / (denom * denom);
    std::vector<Term> terms;
    for (Context c = 0; c < C; ++c) {
      if (instance.nu(c) == 0.0 || policies[i](c) == pstar(c)) continue;
      terms.push_back({c, policies[i](c), pstar(c), instance.nu(c) * inv});
    }
    items.push_back(std::move(terms));
    index.push_back(i);
  }
  CombinatorialProblem problem(std::move(items), C, A);
  const auto r = solve_minimax(problem, C, A, config);
  return finish(r, index[r.argmax], star, config);
}

DesignValue rho_linear(const BanditInstance& instance, const PolicyClass& policies,
                       double epsilon, const SolverConfig& config) {
  require(epsilon >= 0.0, ErrorKind::InvalidArgument, "epsilon must be nonnegative");
  require(policies.feature_map() && policies.theta_star(), ErrorKind::InvalidArgument,
          "linear rho needs features and theta_star");
  const FeatureMap& phi = *policies.feature_map();
  const Eigen::VectorXd& theta = *policies.theta_star();
  const auto emb = policy_embeddings(instance, phi, policies);
  std::vector<double> values(emb.size());
  for (std::size_t i = 0; i < emb.size(); ++i) values[i] = emb[i].dot(theta);
  const auto star = static_cast<std::size_t>(
      std::max_element(values.begin(), values.end()) - values.begin());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i != star && values[star] - values[i] <= 1e-9) {
      fail(ErrorKind::AmbiguousOptimum, "policies " + std::to_string(star) + " and " +
                                            std::to_string(i) + " are both optimal");
    }
  }
  const std::size_t C = instance.num_contexts();
  const std::size_t A = instance.num_actions();
  if (policies.size() == 1) return trivial_design(C, A, star);
  std::vector<Eigen::VectorXd> x;
  std::vector<double> scale;
  std::vector<std::size_t> index;
  for (std::size_t i = 0; i < emb.size(); ++i) {
    if (i == star) continue;
    const double gap = values[star] - values[i];
    x.push_back(emb[i] - emb[star]);
    scale.push_back(1.0 / std::max(gap * gap, epsilon * epsilon));
    index.push_back(i);
  }
  LinearProblem problem(instance, phi, std::move(x), std::move(scale), config.ridge);
  const auto r = solve_minimax(problem, C, A, config);
  return finish(r, index[r.argmax], star, config);
}

DesignValue pairwise_design(const BanditInstance& instance, const PolicyClass& policies,
                            const std::vector<std::size_t>& active, const SolverConfig& config) {
  require(!active.empty(), ErrorKind::InvalidArgument, "pairwise design needs policies");
  const std::size_t C = instance.num_contexts();
  const std::size_t A = instance.num_actions();
  if (active.size() == 1) return trivial_design(C, A, active[0]);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < active.size(); ++i) {
    for (std::size_t j = i + 1; j < active.size(); ++j) pairs.emplace_back(active[i], active[j]);
  }
  const bool one_hot = !policies.feature_map() || policies.feature_map()->is_one_hot();
  std::unique_ptr<MinimaxProblem> problem;
  if (one_hot) {
    std::vector<std::vector<Term>> items;
    for (const auto& [i, j] : pairs) {
      std::vector<Term> terms;
      for (Context c = 0; c < C; ++c) {
        if (instance.nu(c) == 0.0 || policies[i](c) == policies[j](c)) continue;
        terms.push_back({c, policies[i](c), policies[j](c), instance.nu(c)});
      }
      items.push_back(std::move(terms));
    }
    problem = std::make_unique<CombinatorialProblem>(std::move(items), C, A);
  } else {
    const FeatureMap& phi = *policies.feature_map();
    const auto emb = policy_embeddings(instance, phi, policies);
    std::vector<Eigen::VectorXd> x;
    for (const auto& [i, j] : pairs) x.push_back(emb[i] - emb[j]);
    std::vector<double> scale(x.size(), 1.0);
    problem = std::make_unique<LinearProblem>(instance, phi, std::move(x), std::move(scale),
                                              config.ridge);
  }
  const auto r = solve_minimax(*problem, C, A, config);
  return finish(r, pairs[r.argmax].first, pairs[r.argmax].second, config);
}

Eigen::MatrixXd design_matrix(const BanditInstance& instance, const FeatureMap& features,
                              const Allocation& allocation, double ridge) {
  const auto d = Eigen::Index(features.dim());
  Eigen::MatrixXd M = ridge * Eigen::MatrixXd::Identity(d, d);
  for (Context c = 0; c < instance.num_contexts(); ++c) {
    for (Action a = 0; a < instance.num_actions(); ++a) {
      const double w = allocation.weight(instance, c, a);
      if (w == 0.0) continue;
      const Eigen::VectorXd f = features(c, a);
      M.noalias() += w * f * f.transpose();
    }
  }
  return M;
}

Eigen::MatrixXd design_inverse(const BanditInstance& instance, const FeatureMap& features,
                               const Allocation& allocation, double ridge) {
  const Eigen::MatrixXd M = design_matrix(instance, features, allocation, ridge);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all()) {
    fail(ErrorKind::Numeric, "design matrix is singular beyond the ridge");
  }
  Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(M.rows(), M.cols()));
  if (!inv.allFinite()) fail(ErrorKind::Numeric, "design inverse is not finite");
  return inv;
}

double design_norm(const BanditInstance& instance, const FeatureMap& features,
                   const Allocation& allocation, const Eigen::VectorXd& phi_pi,
                   const Eigen::VectorXd& phi_other, double ridge) {
  require(phi_pi.size() == phi_other.size() && std::size_t(phi_pi.size()) == features.dim(),
          ErrorKind::InvalidArgument, "design norm vectors must match the feature dimension");
  const Eigen::VectorXd x = phi_pi - phi_other;
  if (x.isZero(0.0)) return 0.0;
  const Eigen::MatrixXd M = design_matrix(instance, features, allocation, ridge);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all()) {
    fail(ErrorKind::Numeric, "design matrix is singular beyond the ridge");
  }
  return x.dot(ldlt.solve(x));
}

double combinatorial_norm(const ContextWeights& weights, const Allocation& allocation,
                          const Policy& pi, const Policy& other) {
  double v = 0.0;
  for (const auto& e : weights.entries()) {
    const Action a = pi(e.context);
    const Action b = other(e.context);
    if (a == b) continue;
    v += e.weight * (1.0 / allocation(e.context, a) + 1.0 / allocation(e.context, b));
  }
  return v;
}

namespace {

// s_a for one context: eta * sum(lambda*gamma) plus the lambda*gamma mass of
// policies whose disagreement with the pivot touches action a.
void context_scores(const PolicyClass& policies, std::span<const WeightedPolicy> support,
                    const Policy& pivot, Context c, double eta, std::vector<double>& s) {
  const std::size_t A = policies.num_actions();
  double base = 0.0;
  double dis = 0.0;
  s.assign(A, 0.0);
  for (const auto& w : support) {
    const double lg = w.lambda * w.gamma;
    base += lg;
    const Action a = policies[w.policy](c);
    if (a != pivot(c)) {
      s[a] += lg;
      dis += lg;
    }
  }
  s[pivot(c)] += dis;
  for (auto& v : s) v += eta * base;
}

}  // namespace

double closed_form_design_value(const PolicyClass& policies,
                                std::span<const WeightedPolicy> support, std::size_t pivot,
                                const ContextWeights& weights, double eta) {
  require(eta >= 0.0, ErrorKind::InvalidArgument, "eta must be nonnegative");
  for (const auto& w : support) {
    require(w.lambda >= 0.0, ErrorKind::InvalidArgument, "lambda must be nonnegative");
    require(w.lambda == 0.0 || w.gamma > 0.0, ErrorKind::InvalidArgument,
            "gamma must be positive on the support of lambda");
  }
  const Policy& pv = policies[pivot];
  std::vector<double> s;
  double total = 0.0;
  for (const auto& e : weights.entries()) {
    context_scores(policies, support, pv, e.context, eta, s);
    double root = 0.0;
    for (double v : s) root += std::sqrt(std::max(v, 0.0));
    total += e.weight * root * root;
  }
  return total;
}

Allocation allocation_from_lambda_gamma(const PolicyClass& policies,
                                        std::span<const WeightedPolicy> support,
                                        std::size_t pivot, double eta, bool* degenerate) {
  const std::size_t C = policies.num_contexts();
  const std::size_t A = policies.num_actions();
  const Policy& pv = policies[pivot];
  Eigen::MatrixXd rows(idx(C), idx(A));
  std::vector<double> s;
  bool flagged = false;
  for (Context c = 0; c < C; ++c) {
    context_scores(policies, support, pv, c, eta, s);
    double norm = 0.0;
    for (Action a = 0; a < A; ++a) {
      const double r = std::sqrt(std::max(s[a], 0.0));
      rows(idx(c), idx(a)) = r;
      norm += r;
    }
    if (norm > 0.0) {
      rows.row(idx(c)) /= norm;
    } else {
      rows.row(idx(c)).setConstant(1.0 / static_cast<double>(A));
      flagged = true;
    }
  }
  if (degenerate) *degenerate = flagged;
  return Allocation(std::move(rows));
}

double trivial_class_bound(const BanditInstance& instance) {
  double bound = 0.0;
  for (Context c = 0; c < instance.num_contexts(); ++c) {
    if (instance.nu(c) == 0.0) continue;
    Action best = 0;
    for (Action a = 1; a < instance.num_actions(); ++a) {
      if (instance.reward(c, a) > instance.reward(c, best)) best = a;
    }
    double sum = 0.0;
    for (Action a = 0; a < instance.num_actions(); ++a) {
      if (a == best) continue;
      const double gap = instance.reward(c, best) - instance.reward(c, a);
      require(gap > 0.0, ErrorKind::DegenerateGap,
              "context " + std::to_string(c) + " has a zero per-context gap");
      sum += 1.0 / (gap * gap);
    }
    bound = std::max(bound, 2.0 / instance.nu(c) * sum);
  }
  return bound;
}

DisagreementCoefficients disagreement_coefficients(const BanditInstance& instance,
                                                   const PolicyClass& policies,
                                                   double epsilon0) {
  require(epsilon0 > 0.0, ErrorKind::InvalidArgument, "epsilon0 must be positive");
  const std::size_t star = optimal_policy(instance, policies);
  const auto values = policy_values(instance, policies);
  const Policy& pstar = policies[star];
  const std::size_t C = instance.num_contexts();
  std::vector<double> gap(policies.size());
  std::vector<double> mass(policies.size());
  for (std::size_t i = 0; i < policies.size(); ++i) {
    gap[i] = values[star] - values[i];
    double m = 0.0;
    for (Context c = 0; c < C; ++c) {
      if (policies[i](c) != pstar(c)) m += instance.nu(c);
    }
    mass[i] = m;
  }
  // sup over eps >= eps0 of P(exists pi with key(pi) <= eps disagreeing at c) / eps;
  // the numerator is a step function, so the sup sits at eps0 or at a jump.
  auto coefficient = [&](const std::vector<double>& key) {
    std::vector<double> grid{epsilon0};
    for (std::size_t i = 0; i < policies.size(); ++i) {
      if (i != star && key[i] >= epsilon0) grid.push_back(key[i]);
    }
    double best = 0.0;
    for (double eps : grid) {
      double region = 0.0;
      for (Context c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < policies.size(); ++i) {
          if (i != star && key[i] <= eps && policies[i](c) != pstar(c)) {
            region += instance.nu(c);
            break;
          }
        }
      }
      best = std::max(best, region / eps);
    }
    return best;
  };
  return {coefficient(mass), coefficient(gap)};
}

double uniform_gap(const BanditInstance& instance, const PolicyClass& policies) {
  const std::size_t star = optimal_policy(instance, policies);
  const Policy& pstar = policies[star];
  double g = INFINITY;
  for (Context c = 0; c < instance.num_contexts(); ++c) {
    for (Action a = 0; a < instance.num_actions(); ++a) {
      if (a == pstar(c)) continue;
      g = std::min(g, instance.reward(c, pstar(c)) - instance.reward(c, a));
    }
  }
  return g;
}

}  // namespace pacbandit

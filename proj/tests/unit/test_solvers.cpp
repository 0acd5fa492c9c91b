#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "pacbandit/bandit.hpp"
#include "pacbandit/design.hpp"
#include "pacbandit/error.hpp"
#include "pacbandit/oracle.hpp"
#include "pacbandit/solvers.hpp"
#include "support.hpp"

using namespace pacbandit;
using testing_support::DirectH;

namespace {

RoundParams round_params(double eps, std::size_t A, std::size_t K, double delta = 0.1) {
  RoundParams p;
  p.epsilon = eps;
  p.delta = delta / static_cast<double>(K * K);
  p.eta = smoothing_eta(eps, A);
  p.log_coef = std::log(1.0 / p.delta);
  return p;
}

double in_box(const GammaBox& box, Rng& rng) {
  return box.min * std::pow(box.max / box.min, uniform01(rng));
}

DualIterate random_iterate(std::size_t K, const GammaBox& box, double n, Rng& rng) {
  DualIterate it;
  it.n = n;
  it.gamma0 = in_box(box, rng);
  const std::size_t size = 1 + rng() % std::min<std::size_t>(K, 3);
  std::vector<std::size_t> idx(K);
  for (std::size_t i = 0; i < K; ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  double total = 0.0;
  for (std::size_t k = 0; k < size; ++k) {
    const double l = 0.05 + uniform01(rng);
    it.support.push_back({idx[k], l, in_box(box, rng)});
    total += l;
  }
  for (auto& w : it.support) w.lambda /= total;
  return it;
}

std::vector<double> dense_lambda(const DualIterate& it, std::size_t K) {
  std::vector<double> l(K, 0.0);
  for (const auto& w : it.support) l[w.policy] = w.lambda;
  return l;
}

std::vector<double> dense_gamma(const DualIterate& it, std::size_t K) {
  std::vector<double> g(K);
  for (std::size_t i = 0; i < K; ++i) g[i] = it.gamma(i);
  return g;
}

DirectH direct(const PolicyClass& cls, const ContextWeights& weights, const RoundParams& p,
               double n, std::vector<double> prev = {}) {
  DirectH h{&cls, &weights, 0, 0.0, 1.0, 1.0, 1.0, {}};
  h.pivot = p.pivot;
  h.eta = p.eta;
  h.log_coef = p.log_coef;
  h.n = n;
  h.gap_scale = p.gap_scale;
  h.prev_gap = std::move(prev);
  return h;
}

}  // namespace

TEST_CASE("eval_h") {
  SUBCASE("point mass on the pivot") {
    const auto q = make_hard_instance(4, 1.0);
    const auto w = ContextWeights::from_instance(q.instance);
    const RoundParams p = round_params(0.5, 2, 4);
    const double n = 1000.0;
    const GammaBox box = gamma_box(p, 2, n);
    DualIterate it;
    it.n = n;
    it.gamma0 = box.max;
    const double g = std::sqrt(box.min * box.max);
    it.support = {{0, 1.0, g}};
    CHECK(eval_h(q.policies, it, p, w) == doctest::Approx(p.log_coef / (g * n) + 4.0 * p.eta * g));
  }
  SUBCASE("agrees with direct evaluation on random iterates") {
    Rng rng = make_rng(101);
    for (int trial = 0; trial < 30; ++trial) {
      const auto q = testing_support::random_problem(3, 3, 6, 200 + trial);
      const auto w = ContextWeights::from_instance(q.instance);
      RoundParams p = round_params(0.25, 3, q.policies.size());
      p.pivot = rng() % q.policies.size();
      std::vector<double> prev(q.policies.size());
      for (auto& v : prev) v = uniform01(rng) - 0.3;
      p.previous_gap = [&](std::size_t i) { return prev[i]; };
      const double n = 50.0 + 1000.0 * uniform01(rng);
      const auto it = random_iterate(q.policies.size(), gamma_box(p, 3, n), n, rng);
      const double expect = direct(q.policies, w, p, n, prev)(dense_lambda(it, q.policies.size()),
                                                             dense_gamma(it, q.policies.size()));
      CHECK(eval_h(q.policies, it, p, w) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
  SUBCASE("doubling n halves only the log terms") {
    Rng rng = make_rng(103);
    const auto q = make_hard_instance(4, 1.0);
    const auto w = ContextWeights::from_instance(q.instance);
    const RoundParams p = round_params(0.5, 2, 4);
    const double n = 400.0;
    const GammaBox box = gamma_box(p, 2, n);
    // Gammas inside both the box at n and the box at 2n.
    const GammaBox overlap{box.min, box.max / std::sqrt(2.0)};
    DualIterate it = random_iterate(4, overlap, n, rng);
    double log_terms = 0.0;
    for (const auto& s : it.support) log_terms += s.lambda * p.log_coef / (s.gamma * n);
    const double h1 = eval_h(q.policies, it, p, w);
    it.n = 2.0 * n;
    CHECK(h1 - eval_h(q.policies, it, p, w) == doctest::Approx(log_terms / 2.0));
  }
  SUBCASE("zero smoothing matches the closed-form design value") {
    Rng rng = make_rng(107);
    for (int trial = 0; trial < 10; ++trial) {
      const auto q = testing_support::random_problem(3, 3, 6, 300 + trial);
      const auto w = ContextWeights::from_instance(q.instance);
      RoundParams p = round_params(0.25, 3, q.policies.size());
      p.eta = 0.0;
      const double n = 100.0;
      const auto it = random_iterate(q.policies.size(), GammaBox{0.01, 1.0}, n, rng);
      double linear = 0.0;
      for (const auto& s : it.support) linear += s.lambda * p.log_coef / (s.gamma * n);
      CHECK(eval_h(q.policies, it, p, w) ==
            doctest::Approx(closed_form_design_value(q.policies, it.support, 0, w, 0.0) + linear)
                .epsilon(1e-12));
    }
  }
  SUBCASE("gamma outside the box is an invariant violation") {
    const auto q = make_hard_instance(2, 1.0);
    const auto w = ContextWeights::from_instance(q.instance);
    const RoundParams p = round_params(0.5, 2, 2);
    const GammaBox box = gamma_box(p, 2, 100.0);
    DualIterate it;
    it.n = 100.0;
    it.gamma0 = box.max;
    it.support = {{0, 1.0, 2.0 * box.max}};
    try {
      eval_h(q.policies, it, p, w);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::InvariantViolation);
    }
  }
}

TEST_CASE("lambda gradient") {
  Rng rng = make_rng(109);
  SUBCASE("euler identity") {
    for (int trial = 0; trial < 20; ++trial) {
      const auto q = testing_support::random_problem(3, 2 + trial % 2, 8, 400 + trial);
      const std::size_t A = q.policies.num_actions();
      const auto w = ContextWeights::from_instance(q.instance);
      RoundParams p = round_params(0.25, A, q.policies.size());
      p.pivot = rng() % q.policies.size();
      std::vector<double> prev(q.policies.size());
      for (auto& v : prev) v = uniform01(rng);
      p.previous_gap = [&](std::size_t i) { return prev[i]; };
      const double n = 100.0 + 1000.0 * uniform01(rng);
      const auto it = random_iterate(q.policies.size(), gamma_box(p, A, n), n, rng);
      const auto g = grad_lambda_h(q.policies, it, p, w);
      double inner = 0.0;
      for (const auto& s : it.support) inner += s.lambda * g[s.policy];
      const double h = eval_h(q.policies, it, p, w);
      CHECK(std::abs(inner - h) <= 1e-8 * std::max(1.0, std::abs(h)));
    }
  }
  SUBCASE("central differences") {
    for (int trial = 0; trial < 10; ++trial) {
      const auto q = testing_support::random_problem(2, 3, 6, 500 + trial);
      const std::size_t K = q.policies.size();
      const auto w = ContextWeights::from_instance(q.instance);
      const RoundParams p = round_params(0.5, 3, K);
      const double n = 200.0;
      const auto it = random_iterate(K, gamma_box(p, 3, n), n, rng);
      const DirectH h = direct(q.policies, w, p, n);
      const auto lambda = dense_lambda(it, K);
      const auto gamma = dense_gamma(it, K);
      const auto g = grad_lambda_h(q.policies, it, p, w);
      const double step = 1e-5;
      for (std::size_t i = 0; i < K; ++i) {
        auto up = lambda;
        auto down = lambda;
        up[i] += step;
        down[i] -= step;
        const double fd = (h(up, gamma) - h(down, gamma)) / (2.0 * step);
        CHECK(std::abs(fd - g[i]) <= 1e-3 * std::max(1.0, std::abs(g[i])));
        CHECK(grad_lambda_h(q.policies, it, p, w, i) == g[i]);
      }
    }
  }
  SUBCASE("fresh policy uses gamma0") {
    const BanditInstance inst({1.0}, 2, {0.3, 0.6});
    const PolicyClass cls(1, 2, {Policy({0}), Policy({1})});
    const auto w = ContextWeights::from_instance(inst);
    const RoundParams p = round_params(0.5, 2, 2);
    const double n = 300.0;
    const GammaBox box = gamma_box(p, 2, n);
    DualIterate it;
    it.n = n;
    it.gamma0 = std::sqrt(box.min * box.max);
    it.support = {{0, 1.0, box.max}};
    // Both actions get score sqrt(gamma * eta), so each has s = 1/2.
    const double g0 = it.gamma0;
    CHECK(grad_lambda_h(cls, it, p, w, 1) ==
          doctest::Approx(p.log_coef / (g0 * n) + 4.0 * g0 * (1.0 + p.eta)));
  }
}

TEST_CASE("concavity in lambda") {
  Rng rng = make_rng(113);
  for (int trial = 0; trial < 50; ++trial) {
    const auto q = testing_support::random_problem(3, 3, 6, 600 + trial);
    const std::size_t K = q.policies.size();
    const auto w = ContextWeights::from_instance(q.instance);
    const RoundParams p = round_params(0.25, 3, K);
    const double n = 500.0;
    const GammaBox box = gamma_box(p, 3, n);
    std::vector<double> gamma(K);
    for (auto& g : gamma) g = in_box(box, rng);
    auto endpoint = [&] {
      DualIterate it;
      it.n = n;
      it.gamma0 = box.max;
      double total = 0.0;
      for (std::size_t i = 0; i < K; ++i) {
        const double l = uniform01(rng) < 0.5 ? uniform01(rng) : 0.0;
        total += l;
        it.support.push_back({i, l, gamma[i]});
      }
      if (total == 0.0) {
        it.support[0].lambda = 1.0;
        total = 1.0;
      }
      for (auto& s : it.support) s.lambda /= total;
      return it;
    };
    const DualIterate a = endpoint();
    const DualIterate b = endpoint();
    DualIterate mid = a;
    for (std::size_t i = 0; i < K; ++i) mid.support[i].lambda = 0.5 * (a.support[i].lambda + b.support[i].lambda);
    const double ha = eval_h(q.policies, a, p, w);
    const double hb = eval_h(q.policies, b, p, w);
    CHECK(eval_h(q.policies, mid, p, w) >= 0.5 * (ha + hb) - 1e-9);
  }
}

TEST_CASE("gamma block minimization") {
  SUBCASE("single policy matches a fine 1-D grid") {
    const auto q = make_hard_instance(4, 1.0);
    const auto w = ContextWeights::from_instance(q.instance);
    const RoundParams p = round_params(0.5, 2, 4);
    const double n = 800.0;
    const GammaBox box = gamma_box(p, 2, n);
    const DirectH h = direct(q.policies, w, p, n);
    for (std::size_t pi = 1; pi < 4; ++pi) {
      DualIterate it;
      it.n = n;
      it.gamma0 = box.max;
      it.support = {{pi, 1.0, box.max}};
      const auto r = gd_gamma(q.policies, it, p, w, 1e-9);
      std::vector<double> lambda(4, 0.0);
      lambda[pi] = 1.0;
      const double step = (box.max - box.min) * 1e-4;
      double best = HUGE_VAL;
      double arg = box.min;
      for (int k = 0; k <= 10000; ++k) {
        const double g = box.min + k * step;
        std::vector<double> gamma(4, g);
        const double v = h(lambda, gamma);
        if (v < best) {
          best = v;
          arg = g;
        }
      }
      CHECK(r.converged);
      CHECK(std::abs(r.iterate.support[0].gamma - arg) <= 2.0 * step);
      CHECK(r.h <= best + 1e-12);
    }
  }
  SUBCASE("the pivot alone sits at the upper end of the box") {
    const auto q = make_hard_instance(4, 1.0);
    const auto w = ContextWeights::from_instance(q.instance);
    const RoundParams p = round_params(0.5, 2, 4);
    const GammaBox box = gamma_box(p, 2, 800.0);
    DualIterate it;
    it.n = 800.0;
    it.gamma0 = box.max;
    it.support = {{0, 1.0, box.min}};
    const auto r = gd_gamma(q.policies, it, p, w, 1e-9);
    CHECK(r.iterate.support[0].gamma == doctest::Approx(box.max).epsilon(1e-9));
  }
  SUBCASE("never increases h and stays in the box") {
    Rng rng = make_rng(127);
    for (int trial = 0; trial < 20; ++trial) {
      const auto q = testing_support::random_problem(3, 3, 6, 700 + trial);
      const auto w = ContextWeights::from_instance(q.instance);
      const RoundParams p = round_params(0.25, 3, q.policies.size());
      const double n = 300.0;
      const GammaBox box = gamma_box(p, 3, n);
      const auto it = random_iterate(q.policies.size(), box, n, rng);
      const auto r = gd_gamma(q.policies, it, p, w, 1e-6);
      CHECK(r.h <= eval_h(q.policies, it, p, w) + 1e-12);
      CHECK_NOTHROW(validate_iterate(r.iterate, p, 3));
      // Coordinatewise optimality against a log grid.
      const DirectH h = direct(q.policies, w, p, n);
      const auto lambda = dense_lambda(r.iterate, q.policies.size());
      auto gamma = dense_gamma(r.iterate, q.policies.size());
      for (const auto& s : r.iterate.support) {
        double best = HUGE_VAL;
        for (int k = 0; k <= 200; ++k) {
          gamma[s.policy] = box.min * std::pow(box.max / box.min, k / 200.0);
          best = std::min(best, h(lambda, gamma));
        }
        gamma[s.policy] = s.gamma;
        CHECK(r.h <= best + 1e-6 * std::abs(best));
      }
    }
  }
}

TEST_CASE("unconstrained gamma minimizers lie in the box") {
  Rng rng = make_rng(131);
  for (int trial = 0; trial < 30; ++trial) {
    const auto q = testing_support::random_problem(3, 2 + trial % 2, 6, 800 + trial);
    const std::size_t K = q.policies.size();
    const std::size_t A = q.policies.num_actions();
    const auto w = ContextWeights::from_instance(q.instance);
    const RoundParams p = round_params(0.25, A, K);
    const double n = 100.0 + 2000.0 * uniform01(rng);
    const GammaBox box = gamma_box(p, A, n);
    const auto it = random_iterate(K, box, n, rng);
    const DirectH h = direct(q.policies, w, p, n);
    const auto lambda = dense_lambda(it, K);
    // 10^3 log-grid spanning two decades beyond each end of the box.
    const double lo = box.min / 100.0;
    const double hi = box.max * 100.0;
    const double ratio = std::pow(hi / lo, 1.0 / 999.0);
    for (const auto& s : it.support) {
      auto gamma = dense_gamma(it, K);
      double best = HUGE_VAL;
      double arg = lo;
      for (int k = 0; k < 1000; ++k) {
        gamma[s.policy] = lo * std::pow(ratio, k);
        const double v = h(lambda, gamma);
        if (v < best) {
          best = v;
          arg = gamma[s.policy];
        }
      }
      CHECK(arg >= box.min / ratio);
      CHECK(arg <= box.max * ratio);
    }
  }
}

TEST_CASE("primal value") {
  SUBCASE("symmetric two-policy instance is maximized off the pivot") {
    const BanditInstance inst({0.5, 0.5}, 2, {0.5, 0.5, 0.5, 0.5});
    const PolicyClass cls(2, 2, {Policy({0, 1}), Policy({1, 0})});
    const auto w = ContextWeights::from_instance(inst);
    const RoundParams p = round_params(0.5, 2, 2);
    const double n = 100.0;
    const GammaBox box = gamma_box(p, 2, n);
    DualIterate it;
    it.n = n;
    it.gamma0 = box.max;
    it.support = {{0, 0.5, box.max}, {1, 0.5, box.max}};
    std::size_t arg = 0;
    primal_value(cls, it, p, w, &arg);
    CHECK(arg == 1);
  }
  SUBCASE("without smoothing the primal bounds h at fw-gd iterates") {
    // h is then the lambda-average of the primal terms.
    for (std::size_t m : {2, 4, 8}) {
      const auto q = make_hard_instance(m, 1.0);
      const auto w = ContextWeights::from_instance(q.instance);
      const RoundParams p = round_params(0.5, 2, m);
      const auto r = fw_gd(q.policies, p, w);
      REQUIRE(r.success);
      RoundParams flat = p;
      flat.eta = 0.0;
      const double h = eval_h(q.policies, r.iterate, flat, w);
      CHECK(primal_value(q.policies, r.iterate, flat, w) >= h - 1e-12 * std::abs(h));
    }
  }
  SUBCASE("tight solve on a two-policy instance closes the gap") {
    const auto q = make_hard_instance(2, 1.0);
    const auto w = ContextWeights::from_instance(q.instance);
    const RoundParams p = round_params(0.5, 2, 2);
    FwConfig cfg;
    cfg.certificate_fraction = 1e-5;
    cfg.max_iterations = 5000;
    const auto r = fw_gd(q.policies, p, w, cfg);
    REQUIRE(r.success);
    CHECK(r.certificate.gap <= 1e-4);
  }
}

TEST_CASE("fw-gd") {
  SUBCASE("certificates and structural flags with an oracle") {
    Rng rng = make_rng(137);
    for (int trial = 0; trial < 12; ++trial) {
      const auto q = testing_support::random_problem(3, 3, 12, 900 + trial);
      const auto w = ContextWeights::from_instance(q.instance);
      RoundParams p = round_params(0.5, 3, q.policies.size());
      p.pivot = rng() % q.policies.size();
      OracleBudget budget;
      EnumerationOracle oracle(q.policies, &budget);
      const auto r = fw_gd(q.policies, p, w, {}, &oracle);
      CHECK(r.support_growth_ok);
      CHECK(r.oracle_budget_ok);
      CHECK(r.oracle_calls == budget.calls_made());
      CHECK(r.iterate.support.size() <= static_cast<std::size_t>(r.certificate.iterations) + 1);
      if (r.success) {
        CHECK(std::abs(r.certificate.gap) <= p.epsilon);
        CHECK(r.certificate.dual <= p.epsilon);
      }
      // The oracle path finds the same n as enumeration.
      const auto dense = fw_gd(q.policies, p, w);
      CHECK(dense.iterate.n == r.iterate.n);
    }
  }
  SUBCASE("terminal value does not grow with n") {
    const auto q = make_hard_instance(4, 1.0);
    const auto w = ContextWeights::from_instance(q.instance);
    const RoundParams p = round_params(0.5, 2, 4);
    FwConfig cfg;
    cfg.early_reject = false;
    cfg.certificate_fraction = 1e-6;
    cfg.max_iterations = 3000;
    double prev = HUGE_VAL;
    for (double n = 16.0; n <= 1024.0; n *= 2.0) {
      const auto r = fw_gd_fixed_n(q.policies, p, w, n, cfg);
      CHECK(r.certificate.dual <= prev + 1e-6);
      prev = r.certificate.dual;
    }
  }
  SUBCASE("hard instance n within a factor 4 of a brute-force scan") {
    for (double eps : {0.5, 0.25}) {
      const auto q = make_hard_instance(2, 1.0);
      const auto w = ContextWeights::from_instance(q.instance);
      const RoundParams p = round_params(eps, 2, 2);
      const auto r = fw_gd(q.policies, p, w);
      REQUIRE(r.success);
      const auto box = [&](double n) {
        const GammaBox b = gamma_box(p, 2, n);
        return std::pair{b.min, b.max};
      };
      const double n_star = testing_support::brute_force_saddle_n(direct(q.policies, w, p, 1.0), box,
                                                                  eps, 16.0, 1 << 24);
      REQUIRE(n_star > 0.0);
      CHECK(r.iterate.n <= 4.0 * n_star);
      CHECK(r.iterate.n >= n_star / 4.0);
    }
  }
  SUBCASE("n cap reached is an explicit failure") {
    const auto q = make_hard_instance(4, 1.0);
    const auto w = ContextWeights::from_instance(q.instance);
    const RoundParams p = round_params(0.5, 2, 4);
    FwConfig cfg;
    cfg.n_max = 32.0;
    const auto r = fw_gd(q.policies, p, w, cfg);
    CHECK_FALSE(r.success);
    CHECK(r.certificate.dual > p.epsilon);
  }
}

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "pacbandit/bandit.hpp"
#include "pacbandit/design.hpp"
#include "pacbandit/rng.hpp"

namespace testing_support {

// Random instance and class whose best policy beats the runner-up by `margin`.
inline pacbandit::Problem random_problem(std::size_t contexts, std::size_t actions,
                                         std::size_t policies, std::uint64_t seed,
                                         double margin = 1e-3) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    pacbandit::Rng rng = pacbandit::make_rng(pacbandit::derive_seed(seed, attempt));
    auto inst = pacbandit::make_random_instance(contexts, actions, rng);
    auto cls = pacbandit::make_random_class(contexts, actions, policies, rng);
    if (cls.size() < 2) continue;
    auto v = pacbandit::policy_values(inst, cls);
    std::sort(v.begin(), v.end());
    if (v[v.size() - 1] - v[v.size() - 2] > margin) return {std::move(inst), std::move(cls)};
  }
}

// min over the simplex grid with `steps` cells per unit of sum_a b_a / p_a,
// where b_a = 0 contributes nothing even at p_a = 0. Up to three actions.
inline double grid_min_inverse_sum(const std::vector<double>& b, int steps) {
  auto value = [&](const std::vector<double>& p) -> double {
    double v = 0.0;
    for (std::size_t a = 0; a < b.size(); ++a) {
      if (b[a] == 0.0) continue;
      if (p[a] == 0.0) return HUGE_VAL;
      v += b[a] / p[a];
    }
    return v;
  };
  const double h = 1.0 / steps;
  double best = INFINITY;
  if (b.size() == 1) return value({1.0});
  if (b.size() == 2) {
    for (int i = 0; i <= steps; ++i) best = std::min(best, value({i * h, 1.0 - i * h}));
    return best;
  }
  for (int i = 0; i <= steps; ++i) {
    for (int j = 0; i + j <= steps; ++j) {
      best = std::min(best, value({i * h, j * h, std::max(0.0, 1.0 - (i + j) * h)}));
    }
  }
  return best;
}

// Same minimum found by repeated grid zooming: a coarse simplex grid, then
// finer grids on a shrinking window around the incumbent. Up to three actions.
inline double zoom_min_inverse_sum(const std::vector<double>& b, int steps = 200, int levels = 6) {
  auto value = [&](double p0, double p1, double p2) -> double {
    const double p[3] = {p0, p1, p2};
    double v = 0.0;
    for (std::size_t a = 0; a < b.size(); ++a) {
      if (b[a] == 0.0) continue;
      if (p[a] <= 0.0) return HUGE_VAL;
      v += b[a] / p[a];
    }
    return v;
  };
  if (b.size() == 1) return b[0];
  double c0 = 0.5, c1 = b.size() == 3 ? 1.0 / 3.0 : 0.5;
  double width = 1.0;
  double best = HUGE_VAL;
  for (int level = 0; level < levels; ++level) {
    const double lo0 = std::max(0.0, c0 - width), hi0 = std::min(1.0, c0 + width);
    const double lo1 = std::max(0.0, c1 - width), hi1 = std::min(1.0, c1 + width);
    double n0 = c0, n1 = c1;
    for (int i = 0; i <= steps; ++i) {
      const double p0 = lo0 + (hi0 - lo0) * i / steps;
      if (b.size() == 2) {
        const double v = value(p0, 1.0 - p0, 0.0);
        if (v < best) best = v, n0 = p0;
        continue;
      }
      for (int j = 0; j <= steps; ++j) {
        const double p1 = lo1 + (hi1 - lo1) * j / steps;
        if (p0 + p1 > 1.0) break;
        const double v = value(p0, p1, 1.0 - p0 - p1);
        if (v < best) best = v, n0 = p0, n1 = p1;
      }
    }
    c0 = n0;
    c1 = n1;
    width = 4.0 * std::max(hi0 - lo0, hi1 - lo1) / steps;
  }
  return best;
}

// Dense, unvalidated evaluation of the round objective
//   sum_pi lambda_pi (-gap_scale * prev_gap_pi + log_coef / (gamma_pi n))
//   + E_c[(sum_a sqrt(sum_pi lambda_pi gamma_pi (t_a^{(c)}(pi) + eta)))^2]
// with t_a^{(c)}(pi) = 1{pi(c) = a != pivot(c)} + 1{pivot(c) = a != pi(c)}.
struct DirectH {
  const pacbandit::PolicyClass* policies;
  const pacbandit::ContextWeights* weights;
  std::size_t pivot = 0;
  double eta = 0.0;
  double log_coef = 1.0;
  double n = 1.0;
  double gap_scale = 1.0;
  std::vector<double> prev_gap;  // empty means zero

  double operator()(const std::vector<double>& lambda, const std::vector<double>& gamma) const {
    const auto& cls = *policies;
    const std::size_t A = cls.num_actions();
    const pacbandit::Policy& pv = cls[pivot];
    double h = 0.0;
    for (std::size_t i = 0; i < cls.size(); ++i) {
      if (lambda[i] == 0.0) continue;
      const double d = prev_gap.empty() ? 0.0 : prev_gap[i];
      h += lambda[i] * (-gap_scale * d + log_coef / (gamma[i] * n));
    }
    for (const auto& e : weights->entries()) {
      double s = 0.0;
      for (std::size_t a = 0; a < A; ++a) {
        double b = 0.0;
        for (std::size_t i = 0; i < cls.size(); ++i) {
          const pacbandit::Action x = cls[i](e.context);
          const pacbandit::Action y = pv(e.context);
          const double t = (x == a && a != y ? 1.0 : 0.0) + (y == a && a != x ? 1.0 : 0.0);
          b += lambda[i] * gamma[i] * (t + eta);
        }
        s += std::sqrt(b);
      }
      h += e.weight * s * s;
    }
    return h;
  }
};

// Smallest n in {n0 * 2^k} whose two-policy saddle value max_lambda min_gamma h
// is at most eps, with lambda on a uniform grid and gamma on a log grid over
// the box [gmin(n), gmax(n)]. Returns 0 when no n up to n_max qualifies.
template <class Box>
double brute_force_saddle_n(DirectH h, Box box, double eps, double n0, double n_max,
                            int lambda_steps = 100, int gamma_steps = 60) {
  for (double n = n0; n <= n_max; n *= 2.0) {
    h.n = n;
    const auto [lo, hi] = box(n);
    std::vector<double> grid(gamma_steps + 1);
    for (int k = 0; k <= gamma_steps; ++k) grid[k] = lo * std::pow(hi / lo, double(k) / gamma_steps);
    double saddle = -HUGE_VAL;
    for (int s = 0; s <= lambda_steps; ++s) {
      const double t = double(s) / lambda_steps;
      const std::vector<double> lambda{t, 1.0 - t};
      double inner = HUGE_VAL;
      for (double g0 : grid) {
        for (double g1 : grid) inner = std::min(inner, h(lambda, {g0, g1}));
      }
      saddle = std::max(saddle, inner);
    }
    if (saddle <= eps) return n;
  }
  return 0.0;
}

}  // namespace testing_support

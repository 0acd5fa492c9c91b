#include <cmath>

#include <benchmark/benchmark.h>

#include "pacbandit/bandit.hpp"
#include "pacbandit/oracle.hpp"
#include "pacbandit/solvers.hpp"

namespace pb = pacbandit;

static pb::RoundParams params(double eps, std::size_t A, std::size_t K) {
  pb::RoundParams p;
  p.epsilon = eps;
  p.delta = 0.1 / static_cast<double>(K * K);
  p.eta = pb::smoothing_eta(eps, A);
  p.log_coef = std::log(1.0 / p.delta);
  return p;
}

// One round's saddle-point solve with n-doubling, gradient argmax through the
// enumeration oracle.
static void BM_FwGdHard(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto q = pb::make_hard_instance(m, 1.0);
  const auto w = pb::ContextWeights::from_instance(q.instance);
  const auto p = params(0.25, 2, m);
  for (auto _ : state) {
    pb::EnumerationOracle oracle(q.policies);
    benchmark::DoNotOptimize(pb::fw_gd(q.policies, p, w, {}, &oracle).iterate.n);
  }
}
BENCHMARK(BM_FwGdHard)->Arg(4)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_EvalH(benchmark::State& state) {
  const auto q = pb::make_hard_instance(64, 1.0);
  const auto w = pb::ContextWeights::from_instance(q.instance);
  const auto p = params(0.25, 2, 64);
  const auto box = pb::gamma_box(p, 2, 1000.0);
  pb::DualIterate it;
  it.n = 1000.0;
  it.gamma0 = box.max;
  for (std::size_t i = 0; i < 8; ++i) it.support.push_back({i, 1.0 / 8.0, box.max});
  for (auto _ : state) benchmark::DoNotOptimize(pb::eval_h(q.policies, it, p, w));
}
BENCHMARK(BM_EvalH);

#include <benchmark/benchmark.h>

#include "pacbandit/bandit.hpp"
#include "pacbandit/design.hpp"

namespace pb = pacbandit;

static void BM_RhoHard(benchmark::State& state) {
  const auto p = pb::make_hard_instance(static_cast<std::size_t>(state.range(0)), 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(pb::rho_combinatorial(p.instance, p.policies, 0.0).value);
  }
}
BENCHMARK(BM_RhoHard)->Arg(4)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_RhoLinearTrivial(benchmark::State& state) {
  pb::Rng rng = pb::make_rng(1);
  const auto inst = pb::make_random_instance(3, 3, rng);
  const auto cls = pb::with_one_hot_features(inst, pb::make_trivial_class(inst));
  for (auto _ : state) benchmark::DoNotOptimize(pb::rho_linear(inst, cls, 0.05).value);
}
BENCHMARK(BM_RhoLinearTrivial)->Unit(benchmark::kMillisecond);

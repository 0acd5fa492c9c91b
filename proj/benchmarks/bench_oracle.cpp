#include <benchmark/benchmark.h>

#include "pacbandit/bandit.hpp"
#include "pacbandit/oracle.hpp"

namespace pb = pacbandit;

static pb::CostWeightedDataset dataset(std::size_t C, std::size_t A, std::size_t items, pb::Rng& rng) {
  pb::CostWeightedDataset d(A);
  for (std::size_t i = 0; i < items; ++i) {
    std::vector<double> cost(A);
    for (auto& v : cost) v = pb::uniform01(rng);
    d.add(rng() % C, std::move(cost));
  }
  return d;
}

static void BM_Amo(benchmark::State& state) {
  pb::Rng rng = pb::make_rng(2);
  const auto cls = pb::make_random_class(8, 3, static_cast<std::size_t>(state.range(0)), rng);
  const auto d = dataset(8, 3, 256, rng);
  for (auto _ : state) benchmark::DoNotOptimize(pb::amo(cls, d).index);
}
BENCHMARK(BM_Amo)->Arg(64)->Arg(1024);

static void BM_ConstrainedArgmax(benchmark::State& state) {
  pb::Rng rng = pb::make_rng(3);
  const auto cls = pb::make_random_class(8, 3, 1024, rng);
  const auto d = dataset(8, 3, 256, rng);
  std::vector<std::size_t> forbidden;
  for (std::size_t i = 0; i < static_cast<std::size_t>(state.range(0)); ++i) forbidden.push_back(i);
  std::vector<pb::Context> ctx(8);
  for (pb::Context c = 0; c < 8; ++c) ctx[c] = c;
  pb::EnumerationOracle oracle(cls);
  for (auto _ : state) {
    benchmark::DoNotOptimize(pb::constrained_argmax_avoiding(oracle, d, forbidden, ctx).index);
  }
}
BENCHMARK(BM_ConstrainedArgmax)->Arg(1)->Arg(8)->Arg(32);

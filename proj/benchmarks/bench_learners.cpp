#include <string>

#include <benchmark/benchmark.h>

#include "pacbandit/harness.hpp"

namespace pb = pacbandit;

// One full run on the hard instance, eps = 0.1, delta = 0.1.
static void run(benchmark::State& state, const std::string& learner) {
  pb::ExperimentConfig c;
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto p = pb::build_problem(c.instance, m);
  std::uint64_t seed = 0;
  double tau = 0.0;
  for (auto _ : state) {
    const auto r = pb::run_learner(learner, p, c, seed++);
    tau += static_cast<double>(r.record.tau);
  }
  state.counters["tau"] = benchmark::Counter(tau, benchmark::Counter::kAvgIterations);
}

static void BM_Coda(benchmark::State& state) { run(state, "coda"); }
static void BM_NonelimRage(benchmark::State& state) { run(state, "nonelim_rage"); }
static void BM_EliminationRage(benchmark::State& state) { run(state, "elimination_rage"); }
static void BM_RegretBaseline(benchmark::State& state) { run(state, "regret_baseline"); }

BENCHMARK(BM_Coda)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NonelimRage)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EliminationRage)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RegretBaseline)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

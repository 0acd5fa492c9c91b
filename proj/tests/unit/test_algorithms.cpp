#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "pacbandit/algorithms.hpp"
#include "pacbandit/bandit.hpp"
#include "pacbandit/harness.hpp"
#include "pacbandit/oracle.hpp"
#include "support.hpp"

using namespace pacbandit;

namespace {

LearnerConfig config(double eps = 0.1, double delta = 0.1) {
  LearnerConfig c;
  c.epsilon = eps;
  c.delta = delta;
  return c;
}

LearnerResult run_coda(const Problem& p, const LearnerConfig& c, std::uint64_t seed,
                       std::size_t offline = 2000) {
  const auto data = OfflineDataset::draw(p.instance, offline, derive_seed(seed, 1));
  EnumerationOracle oracle(p.policies);
  Rng rng = make_rng(derive_seed(seed, 2));
  return coda(p.instance, p.policies, c, data, oracle, rng);
}

template <typename F>
LearnerResult run_plain(F&& learner, const Problem& p, const LearnerConfig& c, std::uint64_t seed) {
  Rng rng = make_rng(derive_seed(seed, 2));
  return learner(p.instance, p.policies, c, rng);
}

std::uint64_t round_sum(const RunRecord& r) {
  std::uint64_t s = 0;
  for (const auto& x : r.rounds) s += x.samples;
  return s;
}

double best_value(const Problem& p) {
  const auto v = policy_values(p.instance, p.policies);
  return *std::max_element(v.begin(), v.end());
}

}  // namespace

TEST_CASE("a single policy is returned without sampling") {
  const BanditInstance inst({0.5, 0.5}, 2, {0.1, 0.9, 0.4, 0.2});
  const Problem p{inst, PolicyClass(2, 2, {Policy({1, 0})})};
  const auto c = config();
  for (const auto& r : {run_plain(elimination_rage, p, c, 0), run_plain(nonelim_rage, p, c, 0),
                        run_plain(regret_baseline, p, c, 0), run_coda(p, c, 0)}) {
    CHECK(r.index == 0);
    CHECK(r.record.tau == 0);
    CHECK_FALSE(r.record.failed);
  }
}

TEST_CASE("epsilon of one or more runs no rounds") {
  const auto p = make_hard_instance(4, 1.0);
  for (double eps : {1.0, 2.0}) {
    const auto c = config(eps);
    for (const auto& r : {run_coda(p, c, 3), run_plain(nonelim_rage, p, c, 3)}) {
      CHECK(r.index == 0);
      CHECK(r.record.rounds.empty());
      CHECK(r.record.tau == 0);
    }
  }
}

TEST_CASE("sample accounting and round counts") {
  const auto p = make_hard_instance(4, 1.0);
  const auto c = config(0.1);
  SUBCASE("coda") {
    const auto r = run_coda(p, c, 5);
    CHECK(r.record.rounds.size() == 4);
    CHECK(r.record.tau == round_sum(r.record));
    for (std::size_t l = 0; l < r.record.rounds.size(); ++l) {
      const auto& rr = r.record.rounds[l];
      CHECK(rr.round == static_cast<int>(l) + 1);
      CHECK(rr.epsilon == std::ldexp(1.0, -rr.round));
      REQUIRE(rr.certificate.has_value());
      CHECK(std::abs(rr.certificate->gap) <= rr.epsilon);
    }
  }
  SUBCASE("nonelimination") {
    const auto r = run_plain(nonelim_rage, p, c, 5);
    CHECK(r.record.rounds.size() <= 4);
    CHECK(r.record.tau == round_sum(r.record));
  }
  SUBCASE("elimination") {
    const auto r = run_plain(elimination_rage, p, c, 5);
    CHECK(r.record.rounds.size() <= 4);
    CHECK(r.record.tau == round_sum(r.record));
  }
  SUBCASE("regret baseline") {
    const auto r = run_plain(regret_baseline, p, c, 5);
    CHECK(r.record.tau == round_sum(r.record));
    CHECK(r.record.tau > 0);
  }
}

TEST_CASE("equal seeds give byte-identical records") {
  const auto p = make_hard_instance(4, 1.0);
  const auto c = config(0.1);
  CHECK(run_record_to_json(run_coda(p, c, 9).record) == run_record_to_json(run_coda(p, c, 9).record));
  CHECK(run_record_to_json(run_plain(nonelim_rage, p, c, 9).record) ==
        run_record_to_json(run_plain(nonelim_rage, p, c, 9).record));
  CHECK(run_record_to_json(run_plain(elimination_rage, p, c, 9).record) ==
        run_record_to_json(run_plain(elimination_rage, p, c, 9).record));
  CHECK(run_record_to_json(run_plain(regret_baseline, p, c, 9).record) ==
        run_record_to_json(run_plain(regret_baseline, p, c, 9).record));
  CHECK(run_record_to_json(run_coda(p, c, 9).record) != run_record_to_json(run_coda(p, c, 10).record));
}

TEST_CASE("learners return eps-good policies on small instances") {
  const auto c = config(0.1);
  for (std::size_t m : {2, 4}) {
    const auto p = make_hard_instance(m, 1.0);
    const double best = best_value(p);
    int ok = 0;
    const int seeds = 10;
    for (int s = 0; s < seeds; ++s) {
      for (const auto& r : {run_coda(p, c, s), run_plain(nonelim_rage, p, c, s),
                            run_plain(elimination_rage, p, c, s), run_plain(regret_baseline, p, c, s)}) {
        ok += !r.record.failed && policy_value(p.instance, r.policy) >= best - c.epsilon ? 1 : 0;
      }
    }
    // Four learners per seed, each failing with probability at most delta.
    CHECK(ok >= 4 * seeds - 4);
  }
  SUBCASE("random trivial-class instance") {
    Rng gen = make_rng(211);
    const auto inst = make_random_instance(2, 2, gen);
    const Problem p{inst, with_one_hot_features(inst, make_trivial_class(inst))};
    const double best = best_value(p);
    for (int s = 0; s < 5; ++s) {
      const auto r = run_coda(p, c, s);
      CHECK(policy_value(p.instance, r.policy) >= best - c.epsilon);
    }
  }
}

TEST_CASE("elimination survivors are within four epsilon_l") {
  const auto p = make_hard_instance(4, 1.0);
  const auto v = policy_values(p.instance, p.policies);
  const double best = *std::max_element(v.begin(), v.end());
  const auto c = config(0.0);
  int bad = 0;
  for (int s = 0; s < 20; ++s) {
    const auto r = run_plain(elimination_rage, p, c, s);
    CHECK(r.index == 0);
    for (const auto& rr : r.record.rounds) {
      for (std::size_t i : rr.active) bad += best - v[i] > 4.0 * rr.epsilon ? 1 : 0;
    }
  }
  CHECK(bad <= 2);
}

TEST_CASE("nonelimination pivots lie in the eps_l-good set") {
  const auto p = make_hard_instance(4, 1.0);
  const auto v = policy_values(p.instance, p.policies);
  const double best = *std::max_element(v.begin(), v.end());
  const auto c = config(0.1);
  int bad = 0;
  for (int s = 0; s < 20; ++s) {
    const auto r = run_plain(nonelim_rage, p, c, s);
    for (const auto& rr : r.record.rounds) bad += best - v[rr.pivot] > rr.epsilon ? 1 : 0;
  }
  CHECK(bad <= 2);
}

TEST_CASE("per-context best-arm baseline") {
  const auto c = config(0.05, 0.1);
  SUBCASE("one context is plain best-arm identification") {
    const BanditInstance inst({1.0}, 3, {0.2, 0.7, 0.4});
    for (int s = 0; s < 5; ++s) {
      Rng rng = make_rng(s);
      const auto r = per_context_bai_baseline(inst, c, rng);
      CHECK(r.policy == Policy({1}));
      CHECK(r.record.tau == round_sum(r.record));
    }
  }
  SUBCASE("four identical contexts cost about four times one") {
    // The single-context run uses the per-context confidence delta / 4. The
    // remaining excess over 4 is the wait for the slowest context, since
    // contexts arrive at random and every arrival counts.
    auto one_config = c;
    one_config.epsilon = 0.01;
    one_config.delta = c.delta / 4.0;
    auto four_config = c;
    four_config.epsilon = 0.01;
    const BanditInstance one({1.0}, 2, {0.45, 0.55});
    const BanditInstance four({0.25, 0.25, 0.25, 0.25}, 2,
                              {0.45, 0.55, 0.45, 0.55, 0.45, 0.55, 0.45, 0.55});
    std::vector<double> t1, t4;
    for (int s = 0; s < 40; ++s) {
      Rng a = make_rng(derive_seed(s, 11));
      Rng b = make_rng(derive_seed(s, 12));
      t1.push_back(static_cast<double>(per_context_bai_baseline(one, one_config, a).record.tau));
      const auto r = per_context_bai_baseline(four, four_config, b);
      CHECK(r.policy == Policy({1, 1, 1, 1}));
      t4.push_back(static_cast<double>(r.record.tau));
    }
    const double ratio = median(t4) / median(t1);
    MESSAGE("per-context cost ratio " << ratio);
    CHECK(ratio >= 4.0 * 0.7);
    CHECK(ratio <= 4.0 * 1.3);
  }
}

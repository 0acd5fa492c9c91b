#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "json.hpp"

#include "pacbandit/design.hpp"
#include "pacbandit/error.hpp"
#include "pacbandit/harness.hpp"
#include "support.hpp"

using namespace pacbandit;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const char* env = std::getenv("PACBANDIT_TEST_TMP");
  const fs::path base = env && *env ? fs::path(env) : fs::temp_directory_path() / "pacbandit_test";
  const fs::path dir = base / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_files(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.is_regular_file() ? 1 : 0;
  return n;
}

ExperimentConfig small_config(const fs::path& out) {
  ExperimentConfig c;
  c.instance.m = {4};
  c.learners = {"nonelim_rage"};
  c.seeds = {0, 1};
  c.out = out.string();
  c.workers = 2;
  return c;
}

}  // namespace

TEST_CASE("two seeds and one learner give two records and one csv") {
  const auto dir = scratch("two_seeds");
  const auto r = run_experiment(small_config(dir));
  CHECK(r.records.size() == 2);
  CHECK(count_files(dir / "records") == 2);
  CHECK(fs::exists(dir / "runs.csv"));
  CHECK(fs::exists(dir / "summary.json"));
  std::size_t csv = 0;
  for (const auto& e : fs::directory_iterator(dir)) csv += e.path().extension() == ".csv" ? 1 : 0;
  CHECK(csv == 1);
  const std::string text = slurp(r.csv);
  CHECK(text.rfind("seed,learner,m,epsilon,delta,tau,success,oracle_calls\n", 0) == 0);
  CHECK(text == rows_to_csv(r.rows));
}

TEST_CASE("rows match their records and the summary") {
  const auto dir = scratch("rows");
  auto c = small_config(dir);
  c.learners = {"coda", "regret_baseline"};
  c.instance.m = {2, 4};
  c.seeds = {0, 1, 2};
  c.offline_size = 2000;
  const auto r = run_experiment(c);
  REQUIRE(r.rows.size() == 12);
  for (const auto& row : r.rows) {
    const auto path = dir / "records" /
                      (row.learner + "_m" + std::to_string(row.m) + "_seed" + std::to_string(row.seed) + ".json");
    const auto j = nlohmann::json::parse(slurp(path));
    CHECK(j["tau"].get<std::uint64_t>() == row.tau);
    CHECK(j["learner"].get<std::string>() == row.learner);
  }
  const auto s = nlohmann::json::parse(slurp(r.summary));
  REQUIRE(s["cells"].size() == 4);
  for (const auto& cell : s["cells"]) {
    std::vector<double> taus;
    for (const auto& row : r.rows) {
      if (row.learner == cell["learner"].get<std::string>() && row.m == cell["m"].get<std::size_t>()) {
        taus.push_back(static_cast<double>(row.tau));
      }
    }
    CHECK(cell["runs"].get<std::size_t>() == 3);
    CHECK(cell["median_tau"].get<double>() == median(taus));
  }
  CHECK(s["tau_slope_vs_m"].contains("coda"));
}

TEST_CASE("replaying a config reproduces the csv bytes") {
  const auto a = scratch("replay_a");
  const auto b = scratch("replay_b");
  auto ca = small_config(a);
  ca.learners = {"coda", "elimination_rage"};
  ca.offline_size = 2000;
  auto cb = ca;
  cb.out = b.string();
  cb.workers = 1;
  const auto ra = run_experiment(ca);
  const auto rb = run_experiment(cb);
  CHECK(slurp(ra.csv) == slurp(rb.csv));
  CHECK(slurp(ra.summary) == slurp(rb.summary));
}

TEST_CASE("adding seeds leaves existing runs unchanged") {
  const auto dir = scratch("more_seeds");
  auto c = small_config(dir);
  const auto first = run_experiment(c).rows;
  c.seeds = {0, 1, 2, 3};
  const auto second = run_experiment(c).rows;
  REQUIRE(second.size() == 4);
  for (std::size_t i = 0; i < 2; ++i) CHECK(second[i].tau == first[i].tau);
}

TEST_CASE("separation preset covers six cells") {
  const auto c = separation_preset(3);
  CHECK(c.instance.kind == "hard");
  CHECK(c.instance.m == std::vector<std::size_t>{4, 8, 16});
  CHECK(c.learners == std::vector<std::string>{"coda", "regret_baseline"});
  CHECK(c.seeds.size() == 3);
  auto small = c;
  small.seeds = {0};
  small.offline_size = 2000;
  small.out = scratch("separation").string();
  const auto r = run_experiment(small);
  std::map<std::pair<std::string, std::size_t>, int> cells;
  for (const auto& row : r.rows) ++cells[{row.learner, row.m}];
  CHECK(cells.size() == 6);
}

TEST_CASE("config validation lists every offending field") {
  ExperimentConfig c;
  c.seeds.clear();
  c.epsilon = 0.0;
  c.delta = 1.0;
  c.learners = {"coda", "ucb"};
  try {
    c.validate();
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
    const std::string what = e.what();
    for (const char* field : {"seeds", "epsilon", "delta", "ucb"}) CHECK(what.find(field) != std::string::npos);
  }
  SUBCASE("json forms") {
    const auto j = ExperimentConfig::from_json(
        R"({"instance": {"kind": "hard", "m": 8}, "seeds": {"start": 5, "count": 3}, "epsilon": 0.2})");
    CHECK(j.instance.m == std::vector<std::size_t>{8});
    CHECK(j.seeds == std::vector<std::uint64_t>{5, 6, 7});
    CHECK(j.epsilon == 0.2);
    const auto back = ExperimentConfig::from_json(j.to_json());
    CHECK(back.to_json() == j.to_json());
    CHECK_THROWS_AS(ExperimentConfig::from_json("{not json"), Error);
  }
  SUBCASE("run_experiment rejects an invalid config") {
    ExperimentConfig bad;
    bad.epsilon = 2.0;
    CHECK_THROWS_AS(run_experiment(bad), Error);
  }
}

TEST_CASE("output directory override") {
  ExperimentConfig c;
  c.out = "from_config";
  ::unsetenv(kOutputDirEnv);
  CHECK(resolve_output_dir(c) == fs::path("from_config"));
  ::setenv(kOutputDirEnv, "from_env", 1);
  CHECK(resolve_output_dir(c) == fs::path("from_env"));
  ::setenv(kOutputDirEnv, "", 1);
  CHECK(resolve_output_dir(c) == fs::path("from_config"));
  ::unsetenv(kOutputDirEnv);
}

TEST_CASE("bound formulas") {
  CHECK(lower_bound_formula(4.0, 0.1) == doctest::Approx(4.0 * std::log(1.0 / 0.24)));
  CHECK(lower_bound_formula(4.0, 0.1) == doctest::Approx(5.71).epsilon(1e-3));
  CHECK(regret_pac_formula(4, 1.0, 0.1, std::log(4.0)) == doctest::Approx(5.88).epsilon(1e-3));
  SUBCASE("delta_eps takes eps once it exceeds the smallest gap") {
    const auto p = make_hard_instance(4, 1.0);
    CHECK(predicted_bounds(p.instance, p.policies, 0.6, 0.1).delta_epsilon == doctest::Approx(0.6));
    CHECK(predicted_bounds(p.instance, p.policies, 0.1, 0.1).delta_epsilon == doctest::Approx(0.5));
  }
  SUBCASE("lower bound never exceeds the upper bound") {
    for (std::size_t m : {2, 4, 8, 16}) {
      const auto p = make_hard_instance(m, 1.0);
      const auto b = predicted_bounds(p.instance, p.policies, 0.1, 0.1, m, 1.0);
      CHECK(b.lower <= b.upper);
      REQUIRE(b.regret_pac.has_value());
    }
    for (int trial = 0; trial < 10; ++trial) {
      const auto p = testing_support::random_problem(3, 3, 8, 1000 + trial, 0.05);
      // Below the smallest gap rho_eps equals rho_0, so both bounds describe
      // the same identification problem.
      const auto b = predicted_bounds(p.instance, p.policies, 0.01, 0.05);
      CHECK(b.rho_epsilon == doctest::Approx(b.rho_zero).epsilon(1e-6));
      CHECK(b.lower <= b.upper);
      const auto coarse = predicted_bounds(p.instance, p.policies, 0.2, 0.05);
      CHECK(coarse.rho_epsilon <= coarse.rho_zero * (1.0 + 1e-6));
    }
  }
  SUBCASE("json report") {
    const auto p = make_hard_instance(4, 1.0);
    const auto j = nlohmann::json::parse(bounds_to_json(predicted_bounds(p.instance, p.policies, 0.1, 0.1, 4)));
    CHECK(j["rho_zero"].get<double>() == doctest::Approx(8.0).epsilon(1e-4));
    CHECK(j.contains("regret_pac"));
  }
}

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "pacbandit/algorithms.hpp"
#include "pacbandit/design.hpp"
#include "pacbandit/error.hpp"
#include "pacbandit/harness.hpp"
#include "pacbandit/solvers.hpp"

namespace pb = pacbandit;

namespace {

constexpr int kConfigError = 2;
constexpr int kSolverError = 3;

struct Flags {
  std::string config;
  std::string instance;
  std::vector<std::size_t> m;
  double gap = -1.0;
  double epsilon = -1.0;
  double delta = -1.0;
  std::size_t seeds = 0;
  std::vector<std::string> learners;
  std::size_t offline_size = 0;
  bool strict = false;
  std::string out;
  std::size_t workers = 0;
};

void add_problem_flags(CLI::App* app, Flags& f) {
  app->add_option("--instance", f.instance, "hard | trivial | linear | file:<path>");
  app->add_option("--m", f.m, "hard-instance sizes")->delimiter(',');
  app->add_option("--gap", f.gap, "hard-instance reward gap");
  app->add_option("--epsilon", f.epsilon, "accuracy");
  app->add_option("--delta", f.delta, "confidence");
}

void add_run_flags(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "experiment config JSON");
  add_problem_flags(app, f);
  app->add_option("--seeds", f.seeds, "number of seeds, starting at 0");
  app->add_option("--learners", f.learners, "learner names")->delimiter(',');
  app->add_option("--offline-size", f.offline_size, "offline context dataset size");
  app->add_flag("--strict-constants", f.strict, "worst-case constants");
  app->add_option("--out", f.out, "output directory");
  app->add_option("--workers", f.workers, "worker threads (0 = all cores)");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  pb::require(static_cast<bool>(in), pb::ErrorKind::Config, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Flags override the config file, which overrides the defaults.
pb::ExperimentConfig merge(pb::ExperimentConfig c, const Flags& f) {
  if (!f.instance.empty()) {
    if (f.instance.rfind("file:", 0) == 0) {
      c.instance.kind = "file";
      c.instance.path = f.instance.substr(5);
    } else {
      c.instance.kind = f.instance;
    }
  }
  if (!f.m.empty()) c.instance.m = f.m;
  if (f.gap >= 0.0) c.instance.gap = f.gap;
  if (f.epsilon >= 0.0) c.epsilon = f.epsilon;
  if (f.delta >= 0.0) c.delta = f.delta;
  if (f.seeds > 0) {
    c.seeds.clear();
    for (std::size_t s = 0; s < f.seeds; ++s) c.seeds.push_back(s);
  }
  if (!f.learners.empty()) c.learners = f.learners;
  if (f.offline_size > 0) c.offline_size = f.offline_size;
  if (f.strict) c.strict_constants = true;
  if (!f.out.empty()) c.out = f.out;
  if (f.workers > 0) c.workers = f.workers;
  return c;
}

pb::ExperimentConfig load(const Flags& f) {
  pb::ExperimentConfig c =
      f.config.empty() ? pb::ExperimentConfig{} : pb::ExperimentConfig::from_json(read_text(f.config));
  c = merge(std::move(c), f);
  c.validate();
  return c;
}

pb::Problem first_problem(const pb::ExperimentConfig& c) {
  return pb::build_problem(c.instance, c.instance.m.empty() ? 4 : c.instance.m.front());
}

int cmd_rho(const Flags& f, bool linear) {
  const auto c = load(f);
  const auto p = first_problem(c);
  const auto v = linear ? pb::rho_linear(p.instance, p.policies, c.epsilon, c.design)
                        : pb::rho_combinatorial(p.instance, p.policies, c.epsilon, c.design);
  std::cout << pb::design_value_to_json(v) << '\n';
  return 0;
}

int cmd_design_check(const Flags& f, int round) {
  const auto c = load(f);
  const auto p = first_problem(c);
  pb::RoundParams params;
  params.epsilon = std::ldexp(1.0, -round);
  params.delta = c.delta / (static_cast<double>(round) * round * p.policies.size() * p.policies.size());
  params.eta = pb::smoothing_eta(params.epsilon, p.instance.num_actions());
  params.log_coef = std::log(1.0 / params.delta);
  pb::FwConfig fw = c.fw;
  fw.strict = c.strict_constants;
  const auto weights = pb::ContextWeights::from_instance(p.instance);
  const auto r = pb::fw_gd(p.policies, params, weights, fw);
  std::cout << "{\"n\": " << r.iterate.n << ", \"support\": " << r.iterate.support.size()
            << ", \"success\": " << (r.success ? "true" : "false")
            << ", \"certificate\": " << pb::certificate_to_json(r.certificate) << "}\n";
  return r.success ? 0 : kSolverError;
}

int cmd_run(const pb::ExperimentConfig& c) {
  const auto r = pb::run_experiment(c);
  std::cout << read_text(r.summary.string());
  std::cerr << "wrote " << r.records.size() << " records, " << r.csv.string() << ", "
            << r.summary.string() << '\n';
  return 0;
}

int cmd_bounds(const Flags& f) {
  const auto c = load(f);
  const auto p = first_problem(c);
  std::optional<std::size_t> hard_m;
  if (c.instance.kind == "hard") hard_m = c.instance.m.front();
  const auto b = pb::predicted_bounds(p.instance, p.policies, c.epsilon, c.delta, hard_m,
                                      c.instance.gap, c.design);
  std::cout << pb::bounds_to_json(b) << '\n';
  return 0;
}

// Small end-to-end smoke run: every learner on a small hard instance must
// return an eps-good policy, and rho must match its closed form.
int cmd_selftest() {
  int failures = 0;
  auto check = [&](bool ok, const std::string& what) {
    std::printf("%s %s\n", ok ? "ok  " : "FAIL", what.c_str());
    failures += ok ? 0 : 1;
  };
  pb::ExperimentConfig c;
  c.instance.m = {4};
  c.epsilon = 0.1;
  const auto p = first_problem(c);
  const auto values = pb::policy_values(p.instance, p.policies);
  const double best = *std::max_element(values.begin(), values.end());
  for (const std::string l : {"coda", "elimination_rage", "nonelim_rage", "regret_baseline"}) {
    const auto r = pb::run_learner(l, p, c, 0);
    check(!r.record.failed && pb::policy_value(p.instance, r.policy) >= best - c.epsilon,
          l + " returns an eps-good policy (tau " + std::to_string(r.record.tau) + ")");
  }
  const auto rho = pb::rho_combinatorial(p.instance, p.policies, 0.0);
  check(std::abs(rho.value - 8.0) < 1e-3 * 8.0, "hard-instance rho at m=4, gap=1");
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pacbandit: PAC policy identification for contextual bandits"};
  app.require_subcommand(1);
  Flags f;
  bool linear = false;
  int round = 1;

  auto* rho = app.add_subcommand("rho", "instance complexity of a problem");
  add_problem_flags(rho, f);
  rho->add_option("--config", f.config, "experiment config JSON");
  rho->add_flag("--linear", linear, "linear form with one-hot features");

  auto* design = app.add_subcommand("design-check", "solve one round's saddle point and print its certificate");
  add_problem_flags(design, f);
  design->add_option("--config", f.config, "experiment config JSON");
  design->add_flag("--strict-constants", f.strict, "worst-case constants");
  design->add_option("--round", round, "round index")->check(CLI::PositiveNumber);

  auto* run = app.add_subcommand("run", "run an experiment");
  add_run_flags(run, f);

  auto* sep = app.add_subcommand("separation", "CODA against the regret baseline on the hard instance");
  add_run_flags(sep, f);

  auto* bounds = app.add_subcommand("bounds", "predicted sample-complexity bounds");
  add_problem_flags(bounds, f);
  bounds->add_option("--config", f.config, "experiment config JSON");

  app.add_subcommand("selftest", "quick end-to-end check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (rho->parsed()) return cmd_rho(f, linear);
    if (design->parsed()) return cmd_design_check(f, round);
    if (run->parsed()) return cmd_run(load(f));
    if (sep->parsed()) {
      pb::ExperimentConfig c = pb::separation_preset(20);
      if (!f.config.empty()) c = pb::ExperimentConfig::from_json(read_text(f.config));
      c = merge(std::move(c), f);
      c.validate();
      return cmd_run(c);
    }
    if (bounds->parsed()) return cmd_bounds(f);
    return cmd_selftest();
  } catch (const pb::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    const bool config = e.kind() == pb::ErrorKind::Config || e.kind() == pb::ErrorKind::InvalidArgument;
    return config ? kConfigError : kSolverError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSolverError;
  }
}

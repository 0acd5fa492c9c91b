#include "pacbandit/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "pacbandit/error.hpp"
#include "pacbandit/oracle.hpp"
#include "pacbandit/rng.hpp"

namespace pacbandit {

namespace {

using nlohmann::ordered_json;

const std::vector<std::string>& known_learners() {
  static const std::vector<std::string> names = {
      "coda", "elimination_rage", "nonelim_rage", "regret_baseline", "per_context_bai"};
  return names;
}

std::string shortest(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Config, "cannot write " + path.string());
  out << text;
  require(static_cast<bool>(out), ErrorKind::Config, "write failed for " + path.string());
}

template <typename T>
void read_if(const ordered_json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

}  // namespace

void ExperimentConfig::validate() const {
  std::vector<std::string> bad;
  const auto& k = instance.kind;
  if (k != "hard" && k != "trivial" && k != "linear" && k != "file") {
    bad.push_back("instance.kind: unknown kind '" + k + "'");
  }
  if (k == "hard") {
    if (instance.m.empty()) bad.push_back("instance.m: at least one value is required");
    for (std::size_t m : instance.m) {
      if (m < 2) bad.push_back("instance.m: every value must be at least 2");
    }
    if (!(instance.gap > 0.0 && instance.gap <= 1.0)) bad.push_back("instance.gap: must lie in (0,1]");
  }
  if (k == "trivial" || k == "linear") {
    if (instance.contexts == 0) bad.push_back("instance.contexts: must be positive");
    if (instance.actions < 2) bad.push_back("instance.actions: must be at least 2");
  }
  if (k == "linear" && instance.policies < 1) bad.push_back("instance.policies: must be positive");
  if (k == "file" && instance.path.empty()) bad.push_back("instance.path: required for kind 'file'");
  if (learners.empty()) bad.push_back("learners: at least one learner is required");
  for (const auto& l : learners) {
    if (std::find(known_learners().begin(), known_learners().end(), l) == known_learners().end()) {
      bad.push_back("learners: unknown learner '" + l + "'");
    }
    if (l == "per_context_bai" && k != "trivial") {
      bad.push_back("learners: per_context_bai needs the trivial instance kind");
    }
  }
  if (!(epsilon > 0.0 && epsilon <= 1.0)) bad.push_back("epsilon: must lie in (0,1]");
  if (!(delta > 0.0 && delta < 1.0)) bad.push_back("delta: must lie in (0,1)");
  if (seeds.empty()) bad.push_back("seeds: at least one seed is required");
  if (out.empty()) bad.push_back("out: output directory is required");
  if (design.max_iterations <= 0) bad.push_back("solver.max_iterations: must be positive");
  if (fw.max_iterations <= 0) bad.push_back("fw.max_iterations: must be positive");
  if (!(fw.n0 > 0.0 && fw.n0 <= fw.n_max)) bad.push_back("fw.n0: must lie in (0, fw.n_max]");
  if (bad.empty()) return;
  std::string msg = "invalid experiment config:";
  for (const auto& b : bad) msg += "\n  " + b;
  fail(ErrorKind::Config, msg);
}

ExperimentConfig ExperimentConfig::from_json(std::string_view text) {
  ExperimentConfig c;
  try {
    const auto j = ordered_json::parse(text);
    if (j.contains("instance")) {
      const auto& ji = j.at("instance");
      read_if(ji, "kind", c.instance.kind);
      if (ji.contains("m")) {
        const auto& jm = ji.at("m");
        c.instance.m = jm.is_array() ? jm.get<std::vector<std::size_t>>()
                                     : std::vector<std::size_t>{jm.get<std::size_t>()};
      }
      read_if(ji, "gap", c.instance.gap);
      read_if(ji, "contexts", c.instance.contexts);
      read_if(ji, "actions", c.instance.actions);
      read_if(ji, "policies", c.instance.policies);
      read_if(ji, "seed", c.instance.seed);
      read_if(ji, "path", c.instance.path);
    }
    read_if(j, "learners", c.learners);
    read_if(j, "epsilon", c.epsilon);
    read_if(j, "delta", c.delta);
    if (j.contains("seeds")) {
      const auto& js = j.at("seeds");
      if (js.is_array()) {
        c.seeds = js.get<std::vector<std::uint64_t>>();
      } else {
        const auto start = js.value("start", std::uint64_t{0});
        const auto count = js.at("count").get<std::uint64_t>();
        c.seeds.clear();
        for (std::uint64_t s = 0; s < count; ++s) c.seeds.push_back(start + s);
      }
    }
    read_if(j, "offline_size", c.offline_size);
    if (j.contains("solver")) {
      const auto& js = j.at("solver");
      read_if(js, "max_iterations", c.design.max_iterations);
      read_if(js, "tol", c.design.tol);
    }
    if (j.contains("fw")) {
      const auto& jf = j.at("fw");
      read_if(jf, "max_iterations", c.fw.max_iterations);
      read_if(jf, "n0", c.fw.n0);
      read_if(jf, "n_max", c.fw.n_max);
    }
    if (j.contains("oracle_cap") && !j.at("oracle_cap").is_null()) {
      c.oracle_cap = j.at("oracle_cap").get<std::uint64_t>();
    }
    read_if(j, "out", c.out);
    read_if(j, "strict_constants", c.strict_constants);
    read_if(j, "workers", c.workers);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("invalid experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string ExperimentConfig::to_json() const {
  ordered_json j;
  j["instance"] = {{"kind", instance.kind},     {"m", instance.m},
                   {"gap", instance.gap},       {"contexts", instance.contexts},
                   {"actions", instance.actions}, {"policies", instance.policies},
                   {"seed", instance.seed},     {"path", instance.path}};
  j["learners"] = learners;
  j["epsilon"] = epsilon;
  j["delta"] = delta;
  j["seeds"] = seeds;
  j["offline_size"] = offline_size;
  j["solver"] = {{"max_iterations", design.max_iterations}, {"tol", design.tol}};
  j["fw"] = {{"max_iterations", fw.max_iterations}, {"n0", fw.n0}, {"n_max", fw.n_max}};
  j["oracle_cap"] = oracle_cap ? ordered_json(*oracle_cap) : ordered_json(nullptr);
  j["out"] = out;
  j["strict_constants"] = strict_constants;
  j["workers"] = workers;
  return j.dump(2);
}

ExperimentConfig separation_preset(std::size_t num_seeds, double gap, double delta) {
  ExperimentConfig c;
  c.instance.kind = "hard";
  c.instance.m = {4, 8, 16};
  c.instance.gap = gap;
  c.learners = {"coda", "regret_baseline"};
  c.delta = delta;
  c.seeds.clear();
  for (std::size_t s = 0; s < num_seeds; ++s) c.seeds.push_back(s);
  c.out = "results/separation";
  return c;
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& config) {
  if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') return env;
  return config.out;
}

Problem build_problem(const InstanceSpec& spec, std::size_t m) {
  if (spec.kind == "hard") {
    Problem p = make_hard_instance(m, spec.gap);
    p.policies = with_one_hot_features(p.instance, p.policies);
    return p;
  }
  if (spec.kind == "trivial" || spec.kind == "linear") {
    Rng rng = make_rng(derive_seed(spec.seed, 0));
    BanditInstance inst = make_random_instance(spec.contexts, spec.actions, rng);
    PolicyClass cls = spec.kind == "trivial"
                          ? make_trivial_class(inst)
                          : make_random_class(spec.contexts, spec.actions, spec.policies, rng);
    cls = with_one_hot_features(inst, cls);
    return {std::move(inst), std::move(cls)};
  }
  if (spec.kind == "file") {
    std::ifstream in(spec.path);
    require(static_cast<bool>(in), ErrorKind::Config, "cannot read instance file " + spec.path);
    std::stringstream ss;
    ss << in.rdbuf();
    ordered_json j;
    try {
      j = ordered_json::parse(ss.str());
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Config, "instance file " + spec.path + ": " + e.what());
    }
    require(j.contains("instance") && j.contains("policies"), ErrorKind::Config,
            "instance file needs \"instance\" and \"policies\"");
    BanditInstance inst = instance_from_json(j.at("instance").dump());
    PolicyClass cls = policy_class_from_json(j.at("policies").dump());
    if (!cls.feature_map()) cls = with_one_hot_features(inst, cls);
    return {std::move(inst), std::move(cls)};
  }
  fail(ErrorKind::Config, "unknown instance kind '" + spec.kind + "'");
}

LearnerResult run_learner(const std::string& learner, const Problem& problem,
                          const ExperimentConfig& config, std::uint64_t seed) {
  LearnerConfig lc;
  lc.epsilon = config.epsilon;
  lc.delta = config.delta;
  lc.design = config.design;
  lc.fw = config.fw;
  lc.strict = config.strict_constants;
  Rng rng = make_rng(derive_seed(seed, 2));
  const auto& inst = problem.instance;
  const auto& cls = problem.policies;
  if (learner == "coda") {
    const std::size_t size =
        config.offline_size > 0 ? config.offline_size : OfflineDataset::default_size(cls.size());
    const OfflineDataset offline = OfflineDataset::draw(inst, size, derive_seed(seed, 1));
    OracleBudget budget(config.oracle_cap);
    EnumerationOracle oracle(cls, &budget);
    return coda(inst, cls, lc, offline, oracle, rng);
  }
  if (learner == "elimination_rage") return elimination_rage(inst, cls, lc, rng);
  if (learner == "nonelim_rage") return nonelim_rage(inst, cls, lc, rng);
  if (learner == "regret_baseline") return regret_baseline(inst, cls, lc, rng);
  if (learner == "per_context_bai") return per_context_bai_baseline(inst, lc, rng);
  fail(ErrorKind::Config, "unknown learner '" + learner + "'");
}

std::string rows_to_csv(const std::vector<RunRow>& rows) {
  std::string out = "seed,learner,m,epsilon,delta,tau,success,oracle_calls\n";
  for (const auto& r : rows) {
    out += std::to_string(r.seed) + ',' + r.learner + ',' + std::to_string(r.m) + ',' +
           shortest(r.epsilon) + ',' + shortest(r.delta) + ',' + std::to_string(r.tau) + ',' +
           (r.success ? "1" : "0") + ',' + std::to_string(r.oracle_calls) + '\n';
  }
  return out;
}

double median(std::vector<double> values) {
  require(!values.empty(), ErrorKind::InvalidArgument, "median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t k = values.size();
  return k % 2 == 1 ? values[k / 2] : 0.5 * (values[k / 2 - 1] + values[k / 2]);
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, ErrorKind::InvalidArgument,
          "slope needs at least two points");
  double mx = 0.0, my = 0.0;
  const double k = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(x[i] > 0.0 && y[i] > 0.0, ErrorKind::InvalidArgument, "log-log slope needs positive data");
    mx += std::log(x[i]) / k;
    my += std::log(y[i]) / k;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  require(sxx > 0.0, ErrorKind::InvalidArgument, "slope needs two distinct x values");
  return sxy / sxx;
}

std::string summarize_rows(const std::vector<RunRow>& rows) {
  std::map<std::string, std::map<std::size_t, std::vector<const RunRow*>>> cells;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    if (!cells.count(r.learner)) order.push_back(r.learner);
    cells[r.learner][r.m].push_back(&r);
  }
  ordered_json j;
  auto jc = ordered_json::array();
  ordered_json slopes = ordered_json::object();
  for (const auto& learner : order) {
    std::vector<double> ms, taus;
    for (const auto& [m, rs] : cells[learner]) {
      std::vector<double> tau, calls;
      double ok = 0.0;
      for (const auto* r : rs) {
        tau.push_back(static_cast<double>(r->tau));
        calls.push_back(static_cast<double>(r->oracle_calls));
        ok += r->success ? 1.0 : 0.0;
      }
      const double med = median(tau);
      jc.push_back({{"learner", learner},
                    {"m", m},
                    {"runs", rs.size()},
                    {"success_rate", ok / static_cast<double>(rs.size())},
                    {"median_tau", med},
                    {"median_oracle_calls", median(calls)}});
      if (med > 0.0) {
        ms.push_back(static_cast<double>(m));
        taus.push_back(med);
      }
    }
    if (ms.size() >= 2) {
      slopes[learner] = log_log_slope(ms, taus);
    } else {
      slopes[learner] = nullptr;
    }
  }
  j["cells"] = std::move(jc);
  j["tau_slope_vs_m"] = std::move(slopes);
  return j.dump(2);
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResult result;
  result.dir = resolve_output_dir(config);
  std::error_code ec;
  std::filesystem::create_directories(result.dir / "records", ec);
  require(!ec, ErrorKind::Config, "cannot create " + (result.dir / "records").string());

  const std::vector<std::size_t> ms =
      config.instance.kind == "hard" ? config.instance.m : std::vector<std::size_t>{0};
  std::vector<Problem> problems;
  std::vector<std::vector<double>> values;
  for (std::size_t m : ms) {
    problems.push_back(build_problem(config.instance, m));
    values.push_back(policy_values(problems.back().instance, problems.back().policies));
  }

  struct Job {
    std::size_t problem;
    std::string learner;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t p = 0; p < problems.size(); ++p) {
    for (const auto& l : config.learners) {
      for (std::uint64_t s : config.seeds) jobs.push_back({p, l, s});
    }
  }
  result.rows.resize(jobs.size());
  result.records.resize(jobs.size());
  std::vector<std::string> errors(jobs.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1)) {
      const Job& job = jobs[i];
      const Problem& prob = problems[job.problem];
      const std::size_t m = ms[job.problem] > 0 ? ms[job.problem] : prob.instance.num_contexts();
      RunRow row{job.seed, job.learner, m, config.epsilon, config.delta, 0, false, 0};
      RunRecord rec;
      try {
        LearnerResult lr = run_learner(job.learner, prob, config, job.seed);
        const double vbest =
            *std::max_element(values[job.problem].begin(), values[job.problem].end());
        row.success = !lr.record.failed &&
                      policy_value(prob.instance, lr.policy) >= vbest - config.epsilon;
        rec = std::move(lr.record);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::Config) {
          errors[i] = e.what();
          continue;
        }
        rec.learner = job.learner;
        rec.failed = true;
        rec.failure = e.what();
      }
      row.tau = rec.tau;
      row.oracle_calls = rec.oracle_calls;
      const auto path = result.dir / "records" /
                        (job.learner + "_m" + std::to_string(m) + "_seed" +
                         std::to_string(job.seed) + ".json");
      try {
        write_file(path, run_record_to_json(rec) + "\n");
      } catch (const Error& e) {
        errors[i] = e.what();
      }
      result.rows[i] = row;
      result.records[i] = path;
    }
  };
  std::size_t workers = config.workers > 0 ? config.workers : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(jobs.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) require(e.empty(), ErrorKind::Config, e);

  result.csv = result.dir / "runs.csv";
  result.summary = result.dir / "summary.json";
  write_file(result.csv, rows_to_csv(result.rows));
  write_file(result.summary, summarize_rows(result.rows) + "\n");
  return result;
}

double lower_bound_formula(double rho_zero, double delta) {
  return rho_zero * std::log(1.0 / (2.4 * delta));
}

double upper_bound_formula(double rho_epsilon, std::size_t num_policies, double epsilon,
                           double delta, double delta_epsilon) {
  const double rounds = std::max(1.0, std::log2(1.0 / epsilon));
  // At least one round is always played.
  return rho_epsilon * std::log(static_cast<double>(num_policies) * rounds / delta) *
         std::max(1.0, std::log(1.0 / delta_epsilon));
}

double regret_pac_formula(std::size_t m, double gap, double delta, double alpha) {
  const double md = static_cast<double>(m);
  const double l = std::log(1.0 / (2.4 * delta));
  return md * md * l * l / (gap * gap * 4.0 * alpha);
}

BoundsReport predicted_bounds(const BanditInstance& instance, const PolicyClass& policies,
                              double epsilon, double delta, std::optional<std::size_t> hard_m,
                              double hard_gap, const SolverConfig& config) {
  require(epsilon > 0.0 && delta > 0.0 && delta < 1.0, ErrorKind::InvalidArgument,
          "bounds need eps > 0 and delta in (0,1)");
  BoundsReport r;
  const auto values = policy_values(instance, policies);
  const double vbest = *std::max_element(values.begin(), values.end());
  double min_gap = INFINITY;
  for (double v : values) {
    if (vbest - v > 1e-12) min_gap = std::min(min_gap, vbest - v);
  }
  r.delta_epsilon = std::isfinite(min_gap) ? std::max(epsilon, min_gap) : epsilon;
  r.rho_epsilon = rho_combinatorial(instance, policies, epsilon, config).value;
  r.rho_zero = rho_combinatorial(instance, policies, 0.0, config).value;
  r.lower = lower_bound_formula(r.rho_zero, delta);
  r.upper = upper_bound_formula(r.rho_epsilon, policies.size(), epsilon, delta, r.delta_epsilon);
  if (hard_m) {
    r.regret_pac = regret_pac_formula(*hard_m, hard_gap, delta, std::log(static_cast<double>(*hard_m)));
  }
  r.trivial = trivial_class_bound(instance);
  r.disagreement = disagreement_coefficients(instance, policies, epsilon);
  r.disagreement_bound =
      2.0 * static_cast<double>(instance.num_actions()) / epsilon * r.disagreement.cost_sensitive;
  return r;
}

std::string bounds_to_json(const BoundsReport& r) {
  ordered_json j;
  j["rho_epsilon"] = r.rho_epsilon;
  j["rho_zero"] = r.rho_zero;
  j["delta_epsilon"] = r.delta_epsilon;
  j["lower"] = r.lower;
  j["upper"] = r.upper;
  j["regret_pac"] = r.regret_pac ? ordered_json(*r.regret_pac) : ordered_json(nullptr);
  j["trivial"] = r.trivial;
  j["disagreement_policy"] = r.disagreement.policy;
  j["disagreement_cost_sensitive"] = r.disagreement.cost_sensitive;
  j["disagreement_bound"] = r.disagreement_bound;
  return j.dump(2);
}

}  // namespace pacbandit

#include "pacbandit/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "pacbandit/error.hpp"

namespace pacbandit {

double catoni_psi(double x) {
  if (x >= 0.0) return std::log1p(x + 0.5 * x * x);
  return -std::log1p(-x + 0.5 * x * x);
}

double catoni_alpha(double n, const CatoniConfig& config) {
  const double L = std::log(2.0 / config.delta);
  return std::sqrt(2.0 * L / (n * config.variance_bound * (1.0 + 2.0 * L / (n - 2.0 * L))));
}

double catoni_deviation_bound(double n, double variance_bound, double delta) {
  const double L = std::log(2.0 / delta);
  return std::sqrt(variance_bound) * std::sqrt(2.0 * L / (n - L));
}

double catoni_mean(std::span<const double> values, const CatoniConfig& config) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<WeightedValue> runs;
  for (double v : sorted) {
    if (!runs.empty() && runs.back().value == v) {
      runs.back().count += 1.0;
    } else {
      runs.push_back({v, 1.0});
    }
  }
  return catoni_mean(std::span<const WeightedValue>(runs), config);
}

double catoni_mean(std::span<const WeightedValue> values, const CatoniConfig& config) {
  require(config.variance_bound > 0.0, ErrorKind::InvalidArgument,
          "catoni variance bound must be positive");
  require(config.delta > 0.0 && config.delta < 1.0, ErrorKind::InvalidArgument,
          "catoni confidence must lie in (0,1)");
  double n = 0.0;
  double lo = INFINITY;
  double hi = -INFINITY;
  for (const auto& wv : values) {
    if (wv.count <= 0.0) continue;
    n += wv.count;
    lo = std::min(lo, wv.value);
    hi = std::max(hi, wv.value);
  }
  const double L = std::log(2.0 / config.delta);
  if (!(n > 2.0 * L)) {
    fail(ErrorKind::InsufficientSamples,
         "catoni needs n > 2 log(2/delta) = " + std::to_string(2.0 * L) + ", got " +
             std::to_string(n));
  }
  if (lo == hi) return lo;
  const double alpha = catoni_alpha(n, config);
  auto score = [&](double y) {
    double s = 0.0;
    for (const auto& wv : values) {
      if (wv.count > 0.0) s += wv.count * catoni_psi(alpha * (wv.value - y));
    }
    return s;
  };
  // The score is decreasing in y, nonnegative at min and nonpositive at max.
  for (int it = 0; it < config.max_iter; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (hi - lo <= config.tol * std::max(1.0, std::abs(mid))) return mid;
    if (score(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double mid = 0.5 * (lo + hi);
  if (hi - lo <= config.tol * std::max(1.0, std::abs(mid))) return mid;
  fail(ErrorKind::Numeric, "catoni root solve did not converge; bracket width " +
                               std::to_string(hi - lo) + ", residual " +
                               std::to_string(score(mid)));
}

double ips_gap_estimate(const SampleBatch& batch, const Policy& pi, const Policy& pivot,
                        double gamma) {
  require(gamma >= 0.0, ErrorKind::InvalidArgument, "gamma must be nonnegative");
  require(!batch.empty(), ErrorKind::InvalidArgument, "ips estimate needs a nonempty batch");
  double total = 0.0;
  for (const auto& s : batch) {
    const int sign = (pivot(s.context) == s.action ? 1 : 0) - (pi(s.context) == s.action ? 1 : 0);
    if (sign != 0) total += sign * s.reward / (s.propensity + gamma);
  }
  return total;
}

RewardTable RewardTable::from_batch(const SampleBatch& batch, std::size_t num_contexts,
                                    std::size_t num_actions) {
  const auto C = static_cast<Eigen::Index>(num_contexts);
  const auto A = static_cast<Eigen::Index>(num_actions);
  RewardTable t{Eigen::MatrixXd::Zero(C, A), Eigen::MatrixXd::Zero(C, A),
                Eigen::MatrixXd::Zero(C, A), static_cast<double>(batch.size())};
  for (const auto& s : batch) {
    require(s.context < num_contexts && s.action < num_actions, ErrorKind::InvalidArgument,
            "sample outside the instance");
    const auto c = static_cast<Eigen::Index>(s.context);
    const auto a = static_cast<Eigen::Index>(s.action);
    if (t.count(c, a) == 0.0) {
      t.propensity(c, a) = s.propensity;
    } else {
      require(t.propensity(c, a) == s.propensity, ErrorKind::InvalidArgument,
              "reward table needs one propensity per cell");
    }
    t.count(c, a) += 1.0;
    t.reward_sum(c, a) += s.reward;
  }
  return t;
}

double ips_gap_estimate(const RewardTable& table, const Policy& pi, const Policy& pivot,
                        double gamma) {
  require(gamma >= 0.0, ErrorKind::InvalidArgument, "gamma must be nonnegative");
  double total = 0.0;
  for (Eigen::Index c = 0; c < table.reward_sum.rows(); ++c) {
    const auto a = static_cast<Eigen::Index>(pi(static_cast<Context>(c)));
    const auto b = static_cast<Eigen::Index>(pivot(static_cast<Context>(c)));
    if (a == b) continue;
    if (table.count(c, b) > 0.0) total += table.reward_sum(c, b) / (table.propensity(c, b) + gamma);
    if (table.count(c, a) > 0.0) total -= table.reward_sum(c, a) / (table.propensity(c, a) + gamma);
  }
  return total;
}

Eigen::VectorXd linear_observation(const SampleRecord& record, const FeatureMap& features,
                                   const Eigen::MatrixXd& design_inverse) {
  require(static_cast<std::size_t>(design_inverse.rows()) == features.dim() &&
              design_inverse.rows() == design_inverse.cols(),
          ErrorKind::InvalidArgument, "design inverse shape mismatch");
  if (record.reward == 0.0) return Eigen::VectorXd::Zero(design_inverse.rows());
  Eigen::VectorXd out = design_inverse * features(record.context, record.action);
  out *= record.reward;
  if (!out.allFinite()) fail(ErrorKind::Numeric, "non-finite linear observation");
  return out;
}

std::string batch_to_csv(const SampleBatch& batch) {
  std::ostringstream out;
  out << "context,action,reward,propensity\n";
  char buf[96];
  for (const auto& s : batch) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g\n", s.context, s.action, s.reward,
                  s.propensity);
    out << buf;
  }
  return out.str();
}

SampleBatch batch_from_csv(std::string_view text) {
  SampleBatch batch;
  std::istringstream in{std::string(text)};
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      require(line.rfind("context,", 0) == 0, ErrorKind::InvalidArgument,
              "batch csv must start with a header row");
      continue;
    }
    SampleRecord s{};
    char* end = nullptr;
    const char* p = line.c_str();
    s.context = std::strtoull(p, &end, 10);
    require(*end == ',', ErrorKind::InvalidArgument, "malformed batch row: " + line);
    s.action = std::strtoull(end + 1, &end, 10);
    require(*end == ',', ErrorKind::InvalidArgument, "malformed batch row: " + line);
    s.reward = std::strtod(end + 1, &end);
    require(*end == ',', ErrorKind::InvalidArgument, "malformed batch row: " + line);
    s.propensity = std::strtod(end + 1, &end);
    require(s.propensity > 0.0 && s.propensity <= 1.0, ErrorKind::InvalidArgument,
            "propensity must lie in (0,1]");
    batch.push_back(s);
  }
  return batch;
}

}  // namespace pacbandit

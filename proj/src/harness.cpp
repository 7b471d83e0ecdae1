#include "amcs/harness.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>

#include <boost/math/distributions/binomial.hpp>
#include <fmt/format.h>

#include "amcs/error.hpp"
#include "amcs/random.hpp"

namespace amcs::harness {

void ForestSpec::validate() const {
  if (node_count < 1) throw Error(ErrorCode::invalid_config, "harness.node_count: must be >= 1");
  if (p_values.empty()) {
    double sum = 0.0;
    for (double w : bucket_weights) {
      if (!(w >= 0.0)) {
        throw Error(ErrorCode::invalid_config, "harness.bucket_weights: weights must be >= 0");
      }
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw Error(ErrorCode::invalid_config, "harness.bucket_weights: weights must sum to 1");
    }
  }
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(ErrorCode::invalid_config, "harness.p_values: values must lie in [0,1]");
    }
  }
}

std::vector<ForestNode> make_forest(const ForestSpec& spec) {
  spec.validate();
  std::vector<ForestNode> forest;
  forest.reserve(static_cast<std::size_t>(spec.node_count));
  for (int i = 0; i < spec.node_count; ++i) {
    Rng rng(derive_seed(derive_seed(spec.seed, "forest"), static_cast<std::uint64_t>(i)));
    double p = 0.0;
    if (!spec.p_values.empty()) {
      const auto k = std::min(spec.p_values.size() - 1,
                              static_cast<std::size_t>(uniform01(rng) * spec.p_values.size()));
      p = spec.p_values[k];
    } else {
      const double u = uniform01(rng);
      std::size_t b = 0;
      double acc = spec.bucket_weights[0];
      while (b + 1 < dataset::kBuckets && (u >= acc || spec.bucket_weights[b] == 0.0)) {
        ++b;
        acc += spec.bucket_weights[b];
      }
      while (b > 0 && spec.bucket_weights[b] == 0.0) --b;
      const double lo = dataset::kBucketEdges[b];
      const double hi = dataset::kBucketEdges[b + 1];
      p = lo + (hi - lo) * uniform01(rng);
    }
    forest.push_back({i, p, rollout::default_sim_spec(p)});
  }
  return forest;
}

SignTest sign_test(int wins, int losses, int ties) {
  SignTest t{wins, losses, ties, 1.0, 1.0};
  const int n = wins + losses;
  if (n == 0) return t;
  const boost::math::binomial_distribution<double> dist(n, 0.5);
  auto upper = [&](int k) { return k <= 0 ? 1.0 : boost::math::cdf(boost::math::complement(dist, k - 1)); };
  t.p_superior = upper(wins);
  t.p_inferior = upper(losses);
  return t;
}

namespace {

struct Tally {
  double abs_error = 0.0;
  long long rollouts = 0;
  std::array<long long, dataset::kBuckets> bucket_rollouts{};
  std::array<long long, dataset::kBuckets> bucket_count{};
  long long count = 0;

  void add(double true_p, double err, int n) {
    abs_error += err;
    rollouts += n;
    const auto b = dataset::value_bucket(true_p);
    bucket_rollouts[b] += n;
    ++bucket_count[b];
    ++count;
  }

  PolicySummary summary(const std::string& name) const {
    PolicySummary s;
    s.policy = name;
    if (count == 0) return s;
    s.mae = abs_error / static_cast<double>(count);
    s.mean_rollouts = static_cast<double>(rollouts) / static_cast<double>(count);
    for (std::size_t b = 0; b < dataset::kBuckets; ++b) {
      if (bucket_count[b] > 0) {
        s.bucket_rollouts[b] =
            static_cast<double>(bucket_rollouts[b]) / static_cast<double>(bucket_count[b]);
      }
    }
    const long long extreme_count = bucket_count.front() + bucket_count.back();
    if (bucket_count[2] > 0 && extreme_count > 0) {
      const double extreme = static_cast<double>(bucket_rollouts.front() + bucket_rollouts.back()) /
                             static_cast<double>(extreme_count);
      s.mid_extreme_ratio = *s.bucket_rollouts[2] / extreme;
    }
    return s;
  }
};

rollout::Problem synthetic_problem(int node_id) {
  return rollout::make_problem(fmt::format("node-{}", node_id), "synthetic node", "1");
}

}  // namespace

ComparisonReport run_comparison(const std::vector<ForestNode>& forest,
                                const estimation::EstimatorConfig& cfg,
                                const std::vector<std::uint64_t>& seeds,
                                const ComparisonOptions& options) {
  cfg.validate();
  if (seeds.empty()) throw Error(ErrorCode::invalid_config, "harness.seeds: need at least one seed");
  if (forest.empty()) throw Error(ErrorCode::invalid_config, "harness.node_count: empty forest");
  if (!options.match_budget && options.fixed_n < 1) {
    throw Error(ErrorCode::invalid_config, "harness.fixed_n: must be >= 1");
  }

  std::vector<std::shared_ptr<rollout::SimulatedSource>> sources;
  sources.reserve(forest.size());
  for (const auto& node : forest) {
    sources.push_back(std::make_shared<rollout::SimulatedSource>(
        std::make_shared<rollout::FixedSpecWorld>(node.spec)));
  }
  const std::vector<std::string> root;

  ComparisonReport report;
  report.seeds = seeds;

  Tally adaptive;
  std::vector<std::vector<std::pair<double, int>>> adaptive_runs(seeds.size());
  for (std::size_t si = 0; si < seeds.size(); ++si) {
    const auto base = derive_seed(seeds[si], "node");
    for (std::size_t i = 0; i < forest.size(); ++i) {
      const auto& node = forest[i];
      const auto problem = synthetic_problem(node.id);
      const auto node_seed = derive_seed(base, static_cast<std::uint64_t>(node.id));
      const auto est = estimation::estimate_node(root, problem, *sources[i], cfg, node_seed);
      adaptive_runs[si].emplace_back(est.mu_hat, est.n_total);
      adaptive.add(node.true_p, std::abs(est.mu_hat - node.true_p), est.n_total);
    }
  }
  report.adaptive = adaptive.summary("adaptive");
  report.fixed_n = options.match_budget
                       ? std::max(1, static_cast<int>(std::lround(report.adaptive.mean_rollouts)))
                       : options.fixed_n;

  Tally fixed;
  int wins = 0;
  int losses = 0;
  int ties = 0;
  for (std::size_t si = 0; si < seeds.size(); ++si) {
    const auto base = derive_seed(seeds[si], "node");
    double a_err = 0.0;
    double f_err = 0.0;
    long long a_roll = 0;
    for (std::size_t i = 0; i < forest.size(); ++i) {
      const auto& node = forest[i];
      const auto problem = synthetic_problem(node.id);
      const auto node_seed = derive_seed(base, static_cast<std::uint64_t>(node.id));
      const double f = estimation::fixed_budget_estimate(root, problem, *sources[i],
                                                         report.fixed_n, node_seed);
      const auto [a, a_n] = adaptive_runs[si][i];
      const double ae = std::abs(a - node.true_p);
      const double fe = std::abs(f - node.true_p);
      fixed.add(node.true_p, fe, report.fixed_n);
      a_err += ae;
      f_err += fe;
      a_roll += a_n;
      if (options.keep_rows) {
        report.rows.push_back({node.id, node.true_p, "adaptive", a, ae, a_n, seeds[si]});
        report.rows.push_back({node.id, node.true_p, "fixed", f, fe, report.fixed_n, seeds[si]});
      }
    }
    const double n = static_cast<double>(forest.size());
    SeedResult r{seeds[si], a_err / n, f_err / n, static_cast<double>(a_roll) / n};
    if (r.adaptive_mae < r.fixed_mae) {
      ++wins;
    } else if (r.adaptive_mae > r.fixed_mae) {
      ++losses;
    } else {
      ++ties;
    }
    report.per_seed.push_back(r);
  }
  report.fixed = fixed.summary("fixed");
  if (seeds.size() >= 2) report.sign = sign_test(wins, losses, ties);
  return report;
}

void write_node_csv(const ComparisonReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing", 0);
  out << "node_id,true_p,policy,estimate,abs_error,rollouts,seed\n";
  std::size_t written = 0;
  for (const auto& r : report.rows) {
    out << fmt::format("{},{},{},{},{},{},{}\n", r.node_id, r.true_p, r.policy, r.estimate,
                       r.abs_error, r.rollouts, r.seed);
    if (!out) throw IoError("write to " + path + " failed", written);
    ++written;
  }
}

void write_summary_csv(const ComparisonReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing", 0);
  auto opt = [](const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(); };
  out << "policy,mae,mean_rollouts,rollouts_b0,rollouts_b1,rollouts_b2,rollouts_b3,rollouts_b4,"
         "mid_extreme_ratio,fixed_n,seeds\n";
  for (const auto* s : {&report.adaptive, &report.fixed}) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", s->policy, s->mae, s->mean_rollouts,
                       opt(s->bucket_rollouts[0]), opt(s->bucket_rollouts[1]),
                       opt(s->bucket_rollouts[2]), opt(s->bucket_rollouts[3]),
                       opt(s->bucket_rollouts[4]), opt(s->mid_extreme_ratio), report.fixed_n,
                       report.seeds.size());
  }
  if (!out) throw IoError("write to " + path + " failed", 0);
}

}  // namespace amcs::harness

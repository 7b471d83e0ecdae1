#include "amcs/estimation.hpp"

#include <cmath>

#include "amcs/error.hpp"
#include "amcs/random.hpp"

namespace amcs::estimation {

double wilson_delta(int successes, int n, double z) {
  if (n == 0) return 1.0;
  if (n < 0 || successes < 0 || successes > n) {
    throw Error(ErrorCode::validation, "wilson_delta needs 0 <= s <= n (s=" +
                                           std::to_string(successes) +
                                           ", n=" + std::to_string(n) + ")");
  }
  if (!(z >= 0.0)) throw Error(ErrorCode::validation, "wilson_delta needs z >= 0");
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  return z / (1.0 + z2 / nn) * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
}

double node_delta(std::span<const ClusterWeight> clusters) {
  int total = 0;
  for (const auto& c : clusters) total += c.n;
  if (total <= 0) {
    throw Error(ErrorCode::empty_sample, "node_delta needs at least one sampled rollout");
  }
  double sum = 0.0;
  for (const auto& c : clusters) {
    const double w = static_cast<double>(c.n) / total;
    sum += w * w * c.delta * c.delta;
  }
  return std::sqrt(sum);
}

void EstimatorConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& what) {
    throw Error(ErrorCode::invalid_config, "estimator." + key + ": " + what);
  };
  if (k_init < 1) fail("k_init", "must be >= 1");
  if (k_max < 1) fail("k_max", "must be >= 1");
  if (k_init > k_max) fail("k_max", "must be >= k_init");
  if (k_clusters < 1) fail("k_clusters", "must be >= 1");
  if (!(eps_node >= 0.0 && eps_node <= 1.0)) fail("eps_node", "must lie in [0,1]");
  if (!(eps_cluster >= 0.0 && eps_cluster <= 1.0)) fail("eps_cluster", "must lie in [0,1]");
  if (n_max_cluster < 1) fail("n_max_cluster", "must be >= 1");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) fail("gamma", "must be a positive real");
  if (m_min < 1) fail("m_min", "must be >= 1");
  if (m_max < m_min) fail("m_max", "must be >= m_min");
  if (!(z > 0.0) || !std::isfinite(z)) fail("z", "must be a positive real");
}

const char* to_string(TerminationReason reason) {
  switch (reason) {
    case TerminationReason::confidence: return "confidence";
    case TerminationReason::budget: return "budget";
    case TerminationReason::cluster_convergence: return "cluster_convergence";
  }
  return "budget";
}

std::optional<TerminationReason> termination_reason_from_string(const std::string& name) {
  if (name == "confidence") return TerminationReason::confidence;
  if (name == "budget") return TerminationReason::budget;
  if (name == "cluster_convergence") return TerminationReason::cluster_convergence;
  return std::nullopt;
}

LoopState loop_state(const clustering::ClusterSet& set) {
  LoopState state;
  std::vector<ClusterWeight> weights;
  for (const auto& c : set.clusters) {
    weights.push_back({c.total, c.delta});
    state.cluster_deltas.push_back(c.delta);
    state.n_total += c.total;
  }
  state.delta_node = node_delta(weights);
  return state;
}

std::vector<int> active_set(const clustering::ClusterSet& set, const EstimatorConfig& cfg) {
  std::vector<int> ids;
  for (const auto& c : set.clusters) {
    if (c.total < cfg.n_max_cluster && c.delta > cfg.eps_cluster) ids.push_back(c.id);
  }
  return ids;
}

std::optional<int> select_target(const clustering::ClusterSet& set, const EstimatorConfig& cfg) {
  std::optional<int> best;
  double best_delta = -1.0;
  for (int id : active_set(set, cfg)) {
    const double d = set.clusters[static_cast<std::size_t>(id)].delta;
    if (d > best_delta) {
      best_delta = d;
      best = id;
    }
  }
  return best;
}

int sample_count(double delta, const EstimatorConfig& cfg) {
  const double scaled = std::ceil(cfg.gamma * delta);
  if (scaled >= cfg.m_max) return cfg.m_max;
  return std::max(cfg.m_min, static_cast<int>(scaled));
}

std::optional<TerminationReason> should_terminate(const LoopState& state,
                                                  const EstimatorConfig& cfg) {
  if (state.delta_node <= cfg.eps_node) return TerminationReason::confidence;
  if (state.n_total >= cfg.k_max) return TerminationReason::budget;
  bool all_converged = !state.cluster_deltas.empty();
  for (double d : state.cluster_deltas) all_converged = all_converged && d <= cfg.eps_cluster;
  if (all_converged) return TerminationReason::cluster_convergence;
  return std::nullopt;
}

double final_estimate(const clustering::ClusterSet& set) {
  const int total = set.total();
  if (total <= 0) throw Error(ErrorCode::empty_sample, "final_estimate needs sampled rollouts");
  int successes = 0;
  for (const auto& c : set.clusters) successes += c.successes;
  return static_cast<double>(successes) / total;
}

namespace {

std::vector<rollout::RolloutRecord> draw(const rollout::RolloutSource& source,
                                         std::span<const std::string> prefix,
                                         const rollout::Problem& problem, int count,
                                         std::uint64_t seed, std::uint64_t first_index,
                                         int iteration) {
  std::vector<rollout::RolloutRecord> batch;
  try {
    batch = source.generate(prefix, problem, count, seed, first_index);
  } catch (const Error& e) {
    throw Error(e.code(), std::string(e.what()) + " [node estimation stopped after " +
                              std::to_string(first_index) + " stream rollouts, iteration " +
                              std::to_string(iteration) + "]");
  }
  if (batch.size() != static_cast<std::size_t>(count)) {
    throw Error(ErrorCode::integrity, "rollout source returned " + std::to_string(batch.size()) +
                                          " records, expected " + std::to_string(count));
  }
  return batch;
}

}  // namespace

NodeEstimate estimate_node(std::span<const std::string> prefix, const rollout::Problem& problem,
                           const rollout::RolloutSource& source, const EstimatorConfig& cfg,
                           std::uint64_t seed, std::vector<rollout::RolloutRecord> initial) {
  cfg.validate();
  if (initial.size() > static_cast<std::size_t>(cfg.k_init)) {
    initial.resize(static_cast<std::size_t>(cfg.k_init));
  }
  std::vector<rollout::RolloutRecord> batch = std::move(initial);
  const int fresh = cfg.k_init - static_cast<int>(batch.size());
  std::uint64_t stream_pos = 0;
  if (fresh > 0) {
    auto drawn = draw(source, prefix, problem, fresh, seed, stream_pos, 0);
    stream_pos += static_cast<std::uint64_t>(fresh);
    for (auto& r : drawn) batch.push_back(std::move(r));
  }

  for (auto& r : batch) rollout::extract_features(r);
  const auto stats = rollout::fit_feature_stats(batch);
  std::vector<rollout::Feature> std_features;
  std::vector<bool> successes;
  for (auto& r : batch) {
    r.std_features = rollout::standardize(r.raw_features, stats);
    std_features.push_back(*r.std_features);
    successes.push_back(r.success);
  }

  auto set = clustering::kmeans_init(std_features, cfg.k_clusters, derive_seed(seed, "kmeans"),
                                     successes, cfg.z);
  set.feature_stats = stats;
  std::size_t next_index = batch.size();

  NodeEstimate estimate;
  while (true) {
    const auto state = loop_state(set);
    if (auto reason = should_terminate(state, cfg)) {
      estimate.termination_reason = *reason;
      break;
    }
    const auto target = select_target(set, cfg);
    if (!target) {
      // Every unconverged cluster sits at its per-cluster cap.
      estimate.termination_reason = TerminationReason::budget;
      break;
    }
    const int m = sample_count(set.clusters[static_cast<std::size_t>(*target)].delta, cfg);
    auto more = draw(source, prefix, problem, m, seed, stream_pos, estimate.iterations + 1);
    stream_pos += static_cast<std::uint64_t>(m);
    for (auto& r : more) {
      rollout::extract_features(r);
      const auto f = rollout::standardize(r.raw_features, stats);
      clustering::update_cluster(set, clustering::assign(f, set), next_index++, r.success, f);
    }
    ++estimate.iterations;
  }

  const auto state = loop_state(set);
  estimate.mu_hat = final_estimate(set);
  estimate.delta_node = state.delta_node;
  estimate.n_total = state.n_total;
  for (const auto& c : set.clusters) {
    estimate.per_cluster.push_back({c.total, c.successes, c.p_hat, c.delta});
  }
  return estimate;
}

double fixed_budget_estimate(std::span<const std::string> prefix, const rollout::Problem& problem,
                             const rollout::RolloutSource& source, int n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::invalid_config, "fixed budget n must be >= 1");
  const auto batch = draw(source, prefix, problem, n, seed, 0, 0);
  int successes = 0;
  for (const auto& r : batch) successes += r.success ? 1 : 0;
  return static_cast<double>(successes) / n;
}

}  // namespace amcs::estimation

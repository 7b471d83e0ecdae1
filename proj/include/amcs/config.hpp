#pragma once

/**
 * Run configuration read from an INI file.
 *
 *   [run]        seed, out_dir, log_level, source, max_parallel_problems, generator_tag
 *   [estimator]  k_init, k_max, k_clusters, eps_node, eps_cluster, n_max_cluster,
 *                gamma, m_min, m_max, z
 *   [search]     alpha, beta, c_puct, temperature_T, max_iterations, max_depth,
 *                branching, step_delimiter
 *   [harness]    node_count, seeds, fixed_n, match_budget, bucket_weights, p_values
 *   [remote]     base_url, model, temperature, max_tokens, max_parallel,
 *                max_retries, backoff_ms, timeout_s
 *   [trainer]    learning_rate, epochs, batch_size, seed
 *   [sim]        seed, strategies, spread, root_p, root_strategy_success
 *
 * Lists are comma separated. In string values `\n` and `\t` are unescaped.
 * Unknown sections and keys are rejected with the key named.
 */

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "amcs/estimation.hpp"
#include "amcs/harness.hpp"
#include "amcs/remote.hpp"
#include "amcs/rollout.hpp"
#include "amcs/search.hpp"
#include "amcs/trainer.hpp"

namespace amcs::config {

struct RunSection {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::string log_level = "info";
  std::string source = "sim";  // sim | remote
  int max_parallel_problems = 1;
  std::string generator_tag = "amcs";
};

struct HarnessConfig {
  int node_count = 500;
  int seeds = 20;  // seeds run.seed, run.seed + 1, ...
  int fixed_n = 16;
  bool match_budget = false;
  std::vector<double> bucket_weights = {0.2, 0.2, 0.2, 0.2, 0.2};
  std::vector<double> p_values;
};

struct RunConfig {
  RunSection run;
  estimation::EstimatorConfig estimator;
  search::SearchConfig search;
  HarnessConfig harness;
  remote::RemoteConfig remote = remote::RemoteConfig::from_env();
  trainer::TrainConfig trainer;
  rollout::SimWorldConfig sim;
  std::optional<std::uint64_t> sim_seed;  // falls back to run.seed

  /// Validates every section; the remote section only when run.source is remote.
  void validate() const;

  rollout::SimWorldConfig sim_world() const;
  harness::ForestSpec forest_spec() const;
  std::vector<std::uint64_t> harness_seeds() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Every effective value as sorted `section.key=value` lines (secrets excluded).
std::string canonical_string(const RunConfig& cfg);

/// 16 hex digits of a stable hash over canonical_string.
std::string config_hash(const RunConfig& cfg);

}  // namespace amcs::config

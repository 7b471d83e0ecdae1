#pragma once

/**
 * Synthetic node forests and the adaptive versus fixed-budget comparison.
 *
 * For every (seed, node) pair both policies read the same rollout stream:
 * node i under seed s uses derive_seed(derive_seed(s, "node"), i), so the
 * fixed policy's N rollouts are exactly the first N of the adaptive stream.
 */

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "amcs/dataset.hpp"
#include "amcs/estimation.hpp"
#include "amcs/rollout.hpp"

namespace amcs::harness {

struct ForestSpec {
  int node_count = 500;
  std::array<double, dataset::kBuckets> bucket_weights = {0.2, 0.2, 0.2, 0.2, 0.2};
  // When non-empty, every node's p is drawn uniformly from this list instead of the buckets.
  std::vector<double> p_values;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ForestNode {
  int id = 0;
  double true_p = 0.0;
  rollout::SimNodeSpec spec;
};

/// p is uniform inside the node's bucket (categorical over bucket_weights).
std::vector<ForestNode> make_forest(const ForestSpec& spec);

struct NodeRow {
  int node_id = 0;
  double true_p = 0.0;
  std::string policy;
  double estimate = 0.0;
  double abs_error = 0.0;
  int rollouts = 0;
  std::uint64_t seed = 0;
};

struct PolicySummary {
  std::string policy;
  double mae = 0.0;
  double mean_rollouts = 0.0;
  // Mean rollouts per true-p bucket, absent for empty buckets.
  std::array<std::optional<double>, dataset::kBuckets> bucket_rollouts{};
  std::optional<double> mid_extreme_ratio;
};

struct SeedResult {
  std::uint64_t seed = 0;
  double adaptive_mae = 0.0;
  double fixed_mae = 0.0;
  double adaptive_mean_rollouts = 0.0;
};

struct SignTest {
  int wins = 0;    // seeds where adaptive MAE < fixed MAE
  int losses = 0;  // seeds where adaptive MAE > fixed MAE
  int ties = 0;
  double p_superior = 1.0;  // P[X >= wins], X ~ Bin(wins + losses, 1/2)
  double p_inferior = 1.0;  // P[X >= losses]
};

SignTest sign_test(int wins, int losses, int ties = 0);

struct ComparisonReport {
  PolicySummary adaptive;
  PolicySummary fixed;
  int fixed_n = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<SeedResult> per_seed;
  std::vector<NodeRow> rows;
  std::optional<SignTest> sign;  // absent with fewer than two seeds
};

struct ComparisonOptions {
  int fixed_n = 16;
  // Replace fixed_n by the adaptive policy's realized mean budget (rounded).
  bool match_budget = false;
  bool keep_rows = true;
};

ComparisonReport run_comparison(const std::vector<ForestNode>& forest,
                                const estimation::EstimatorConfig& cfg,
                                const std::vector<std::uint64_t>& seeds,
                                const ComparisonOptions& options = {});

/// node_id,true_p,policy,estimate,abs_error,rollouts,seed
void write_node_csv(const ComparisonReport& report, const std::string& path);

/// One row per policy with MAE, mean budget, per-bucket budgets and the mid/extreme ratio.
void write_summary_csv(const ComparisonReport& report, const std::string& path);

}  // namespace amcs::harness

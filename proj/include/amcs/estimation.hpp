#pragma once

/**
 * Adaptive node value estimation.
 *
 * A node is estimated by an initial exploratory batch that is clustered into
 * strategy groups, followed by refinement batches sized by the uncertainty of
 * the most uncertain active cluster. The loop stops on node confidence,
 * budget exhaustion or convergence of every cluster, checked in that order
 * and only between batches.
 *
 *   EstimatorConfig cfg;                     // k_init 6, k_max 32, K 3, eps 0.1
 *   auto est = estimate_node(prefix, problem, source, cfg, seed);
 *   est.mu_hat, est.n_total, est.termination_reason
 */

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "amcs/clustering.hpp"
#include "amcs/rollout.hpp"
#include "amcs/uncertainty.hpp"

namespace amcs::estimation {

struct EstimatorConfig {
  int k_init = 6;
  int k_max = 32;
  int k_clusters = 3;
  double eps_node = 0.1;
  double eps_cluster = 0.1;
  int n_max_cluster = 22;
  double gamma = 10.0;
  int m_min = 1;
  int m_max = 8;
  double z = kDefaultZ;

  /// Throws invalid_config naming the offending `estimator.*` key.
  void validate() const;
};

enum class TerminationReason { confidence, budget, cluster_convergence };

const char* to_string(TerminationReason reason);
std::optional<TerminationReason> termination_reason_from_string(const std::string& name);

struct ClusterSummary {
  int n = 0;
  int s = 0;
  double p_hat = 0.0;
  double delta = 0.0;

  bool operator==(const ClusterSummary&) const = default;
};

struct NodeEstimate {
  double mu_hat = 0.0;
  double delta_node = 0.0;
  int n_total = 0;
  std::vector<ClusterSummary> per_cluster;
  TerminationReason termination_reason = TerminationReason::budget;
  int iterations = 0;
};

/// Snapshot the termination rule reads.
struct LoopState {
  double delta_node = 1.0;
  int n_total = 0;
  std::vector<double> cluster_deltas;
};

LoopState loop_state(const clustering::ClusterSet& set);

/// Ids with n_j < n_max_cluster and delta_j > eps_cluster.
std::vector<int> active_set(const clustering::ClusterSet& set, const EstimatorConfig& cfg);

/// Most uncertain active cluster, lowest id on ties.
std::optional<int> select_target(const clustering::ClusterSet& set, const EstimatorConfig& cfg);

/// min(m_max, max(m_min, ceil(gamma * delta))).
int sample_count(double delta, const EstimatorConfig& cfg);

std::optional<TerminationReason> should_terminate(const LoopState& state,
                                                  const EstimatorConfig& cfg);

/// sum_j (n_j / n_total) * p_hat_j, evaluated as pooled successes over n_total.
double final_estimate(const clustering::ClusterSet& set);

/**
 * Runs the adaptive loop for one prefix.
 *
 * Rollouts are drawn from one stream: rollout i uses
 * derive_seed(seed, i). `initial` rollouts (already drawn elsewhere, e.g.
 * the expansion continuations that produced this node) fill the first slots
 * of the initial batch; the stream supplies the rest.
 */
NodeEstimate estimate_node(std::span<const std::string> prefix, const rollout::Problem& problem,
                           const rollout::RolloutSource& source, const EstimatorConfig& cfg,
                           std::uint64_t seed, std::vector<rollout::RolloutRecord> initial = {});

/// Plain success fraction of n rollouts of the same stream.
double fixed_budget_estimate(std::span<const std::string> prefix, const rollout::Problem& problem,
                             const rollout::RolloutSource& source, int n, std::uint64_t seed);

}  // namespace amcs::estimation

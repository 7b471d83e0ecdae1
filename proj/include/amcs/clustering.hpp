#pragma once

/**
 * Strategy clusters over standardized rollout features.
 *
 * The initial batch is partitioned by k-means (k-means++ seeding, Lloyd
 * iterations, cap 100). Later rollouts join the nearest centroid and the
 * cluster's counts, Wilson half-width and centroid are recomputed in place.
 * Centroids live in standardized space only.
 */

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "amcs/rollout.hpp"
#include "amcs/uncertainty.hpp"

namespace amcs::clustering {

using rollout::Feature;

inline constexpr int kDefaultClusters = 3;
inline constexpr int kMaxLloydIterations = 100;

struct Cluster {
  int id = 0;
  std::vector<std::size_t> members;
  std::vector<Feature> member_features;  // parallel to members
  int successes = 0;
  int total = 0;
  double p_hat = 0.0;
  double delta = 1.0;
  Feature centroid{};
};

/// Single-owner mutable partition of a node's rollouts.
struct ClusterSet {
  std::vector<Cluster> clusters;
  rollout::FeatureStats<2> feature_stats{};
  std::uint64_t rng_seed = 0;
  double z = estimation::kDefaultZ;

  std::size_t size() const { return clusters.size(); }
  int total() const;
  bool contains(std::size_t rollout_index) const;
};

/**
 * Partitions `std_features` (rollout i has index i) into
 * min(k, distinct points) non-empty clusters. Cluster ids are ordered by
 * their smallest member index. When `successes` is given it must match the
 * point count and seeds the per-cluster counts.
 */
ClusterSet kmeans_init(std::span<const Feature> std_features, int k, std::uint64_t seed,
                       const std::vector<bool>& successes = {},
                       double z = estimation::kDefaultZ);

/// Nearest centroid by Euclidean distance; ties go to the lowest id.
int assign(const Feature& std_feature, const ClusterSet& set);

/// Adds one rollout to a cluster and refreshes its statistics and centroid.
void update_cluster(ClusterSet& set, int cluster_id, std::size_t rollout_index, bool success,
                    const Feature& std_feature);

}  // namespace amcs::clustering

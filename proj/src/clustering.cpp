#include "amcs/clustering.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "amcs/error.hpp"
#include "amcs/random.hpp"

namespace amcs::clustering {

namespace {

double sq_dist(const Feature& a, const Feature& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  return dx * dx + dy * dy;
}

int nearest(const Feature& f, const std::vector<Feature>& centroids) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = sq_dist(f, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

void refresh(Cluster& cluster, double z) {
  cluster.total = static_cast<int>(cluster.members.size());
  cluster.p_hat = cluster.total > 0 ? static_cast<double>(cluster.successes) / cluster.total : 0.0;
  cluster.delta = estimation::wilson_delta(cluster.successes, cluster.total, z);
  Feature sum{};
  for (const auto& f : cluster.member_features) {
    sum[0] += f[0];
    sum[1] += f[1];
  }
  if (cluster.total > 0) {
    cluster.centroid = {sum[0] / cluster.total, sum[1] / cluster.total};
  }
}

std::vector<Feature> seed_centroids(std::span<const Feature> points, std::size_t k, Rng& rng) {
  std::vector<Feature> centroids;
  centroids.push_back(points[static_cast<std::size_t>(uniform01(rng) * points.size())]);
  std::vector<double> d2(points.size());
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      d2[i] = sq_dist(points[i], centroids[static_cast<std::size_t>(nearest(points[i], centroids))]);
      total += d2[i];
    }
    const double target = uniform01(rng) * total;
    double acc = 0.0;
    std::size_t chosen = points.size();
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (d2[i] <= 0.0) continue;
      acc += d2[i];
      chosen = i;
      if (target < acc) break;
    }
    centroids.push_back(points[chosen]);
  }
  return centroids;
}

}  // namespace

int ClusterSet::total() const {
  int n = 0;
  for (const auto& c : clusters) n += c.total;
  return n;
}

bool ClusterSet::contains(std::size_t rollout_index) const {
  for (const auto& c : clusters) {
    if (std::find(c.members.begin(), c.members.end(), rollout_index) != c.members.end()) {
      return true;
    }
  }
  return false;
}

ClusterSet kmeans_init(std::span<const Feature> std_features, int k, std::uint64_t seed,
                       const std::vector<bool>& successes, double z) {
  if (k < 1) throw Error(ErrorCode::invalid_config, "cluster count k must be >= 1");
  if (std_features.empty()) {
    throw Error(ErrorCode::empty_sample, "k-means needs at least one point");
  }
  if (!successes.empty() && successes.size() != std_features.size()) {
    throw Error(ErrorCode::shape, "successes must match the number of points");
  }

  std::vector<Feature> distinct;
  for (const auto& f : std_features) {
    if (std::find(distinct.begin(), distinct.end(), f) == distinct.end()) distinct.push_back(f);
  }
  const std::size_t n = std_features.size();
  const std::size_t clusters = std::min(static_cast<std::size_t>(k), distinct.size());

  Rng rng(seed);
  auto centroids = seed_centroids(distinct, clusters, rng);
  std::vector<int> labels(n, -1);

  for (int iter = 0; iter < kMaxLloydIterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const int c = nearest(std_features[i], centroids);
      if (c != labels[i]) {
        labels[i] = c;
        changed = true;
      }
    }

    // Empty cluster: take the point farthest from its own centroid.
    std::vector<int> counts(clusters, 0);
    for (int l : labels) ++counts[static_cast<std::size_t>(l)];
    for (std::size_t c = 0; c < clusters; ++c) {
      if (counts[c] > 0) continue;
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto own = static_cast<std::size_t>(labels[i]);
        if (counts[own] < 2) continue;
        const double d = sq_dist(std_features[i], centroids[own]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      --counts[static_cast<std::size_t>(labels[far])];
      labels[far] = static_cast<int>(c);
      counts[c] = 1;
      changed = true;
    }

    std::vector<Feature> sums(clusters, Feature{});
    for (std::size_t i = 0; i < n; ++i) {
      auto& s = sums[static_cast<std::size_t>(labels[i])];
      s[0] += std_features[i][0];
      s[1] += std_features[i][1];
    }
    for (std::size_t c = 0; c < clusters; ++c) {
      centroids[c] = {sums[c][0] / counts[c], sums[c][1] / counts[c]};
    }
    if (!changed) break;
  }

  // Relabel by smallest member index.
  std::vector<int> relabel(clusters, -1);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = relabel[static_cast<std::size_t>(labels[i])];
    if (r < 0) r = next++;
  }

  ClusterSet set;
  set.rng_seed = seed;
  set.z = z;
  set.clusters.resize(clusters);
  for (std::size_t c = 0; c < clusters; ++c) set.clusters[c].id = static_cast<int>(c);
  for (std::size_t i = 0; i < n; ++i) {
    auto& cluster = set.clusters[static_cast<std::size_t>(relabel[static_cast<std::size_t>(labels[i])])];
    cluster.members.push_back(i);
    cluster.member_features.push_back(std_features[i]);
    if (!successes.empty() && successes[i]) ++cluster.successes;
  }
  for (auto& cluster : set.clusters) refresh(cluster, z);
  return set;
}

int assign(const Feature& std_feature, const ClusterSet& set) {
  if (set.clusters.empty()) {
    throw Error(ErrorCode::invalid_state, "cannot assign into an empty cluster set");
  }
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& c : set.clusters) {
    const double d = sq_dist(std_feature, c.centroid);
    if (d < best_d) {
      best_d = d;
      best = c.id;
    }
  }
  return best;
}

void update_cluster(ClusterSet& set, int cluster_id, std::size_t rollout_index, bool success,
                    const Feature& std_feature) {
  if (cluster_id < 0 || static_cast<std::size_t>(cluster_id) >= set.clusters.size()) {
    throw Error(ErrorCode::invalid_state, "cluster id " + std::to_string(cluster_id) +
                                              " out of range");
  }
  if (set.contains(rollout_index)) {
    throw Error(ErrorCode::integrity,
                "rollout " + std::to_string(rollout_index) + " is already clustered");
  }
  auto& cluster = set.clusters[static_cast<std::size_t>(cluster_id)];
  cluster.members.push_back(rollout_index);
  cluster.member_features.push_back(std_feature);
  if (success) ++cluster.successes;
  refresh(cluster, set.z);
}

}  // namespace amcs::clustering

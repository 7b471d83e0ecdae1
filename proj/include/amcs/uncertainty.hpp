#pragma once

#include <span>

namespace amcs::estimation {

inline constexpr double kDefaultZ = 1.96;

/**
 * Half-width of the Wilson score interval for s successes out of n:
 *
 *   delta = z / (1 + z^2/n) * sqrt( p(1-p)/n + z^2/(4n^2) ),  p = s/n
 *
 * n = 0 returns 1.0, the maximal-uncertainty sentinel.
 */
double wilson_delta(int successes, int n, double z = kDefaultZ);

struct ClusterWeight {
  int n = 0;
  double delta = 0.0;
};

/// sqrt( sum_j (n_j / n_total)^2 * delta_j^2 ). All n_j = 0 is an empty-sample error.
double node_delta(std::span<const ClusterWeight> clusters);

}  // namespace amcs::estimation

#pragma once

/**
 * Adaptive path expansion over a reasoning tree.
 *
 * Children of a node are scored by
 *
 *   pi_t = (1 - w_t) * Q + w_t * U,   w_t = exp(-t / T)
 *   Q    = alpha^(1 - mu_hat) * beta^(len(r) / L_p)
 *   U    = c_puct * sqrt( ln N(s) / (1 + N(s,r)) )
 *
 * where t is one global iteration counter per tree. Q reads the child's own
 * adaptive estimate directly; there is no value backup. Each iteration
 * descends from the root by argmax pi_t and expands the leaf it reaches:
 * `branching` continuations are sampled, their first steps (deduplicated)
 * become children, and every child is estimated and emitted as a
 * supervision record.
 */

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "amcs/dataset.hpp"
#include "amcs/estimation.hpp"
#include "amcs/rollout.hpp"

namespace amcs::search {

struct SearchConfig {
  double alpha = 0.5;
  double beta = 0.9;
  double c_puct = 1.0;
  double temperature_T = 16.0;
  int max_iterations = 48;
  int max_depth = 12;
  int branching = 4;
  std::string step_delimiter = "\n\n";

  /// Throws invalid_config naming the offending `search.*` key.
  void validate() const;
};

struct SearchNode {
  std::vector<std::string> prefix_steps;
  int depth = 0;
  int continuation_length = 0;  // tokens of the step that created this node
  std::optional<estimation::NodeEstimate> estimate;
  double q = 0.0;
  int visit_count = 0;  // N(s,r) as seen from the parent
  bool terminal = false;
  std::uint64_t estimate_seed = 0;
  std::vector<SearchNode> children;

  /// N(s) = sum of the children's visit counts.
  int parent_visits() const;
  std::size_t subtree_size() const;
};

struct ScoreComponents {
  std::size_t child = 0;
  double q = 0.0;
  double u = 0.0;
  double w = 0.0;
  double score = 0.0;
  bool greedy = true;  // chosen child is also the argmax-Q child
};

struct TraceEntry {
  int t = 0;
  std::vector<std::size_t> path;  // child indices from the root
  std::vector<ScoreComponents> selections;
};

struct SearchTrace {
  std::vector<TraceEntry> entries;
};

double q_value(double mu_hat, int len_r, int statement_length, const SearchConfig& cfg);

/// Requires parent_visits >= 1.
double u_value(int parent_visits, int child_visits, double c_puct);

double expansion_score(double q, double u, int t, double temperature_T);

/**
 * Picks argmax pi_t over the estimated children (lowest index on ties) and
 * increments its visit count. The exploration term counts the descent in
 * progress as a parent visit: N(s) = parent_visits() + 1.
 *
 * Returns nullopt when the node has no estimated children (must expand).
 */
std::optional<ScoreComponents> select_child(SearchNode& node, int t, const SearchConfig& cfg);

std::vector<std::string> segment_steps(const std::string& continuation, const std::string& delimiter);

/// Returns the number of children attached. Zero marks the node terminal.
std::size_t expand(SearchNode& node, const rollout::Problem& problem,
                   const rollout::RolloutSource& source, const SearchConfig& cfg,
                   const estimation::EstimatorConfig& estimator_cfg, std::uint64_t seed);

struct SearchResult {
  SearchNode root;
  SearchTrace trace;
  std::vector<dataset::SupervisionRecord> records;
  std::optional<std::string> error;  // set when the source failed mid-search
};

SearchResult run_search(const rollout::Problem& problem, const rollout::RolloutSource& source,
                        const SearchConfig& cfg, const estimation::EstimatorConfig& estimator_cfg,
                        std::uint64_t seed, const std::string& generator_tag = "amcs");

/// Fraction of non-greedy selections in [begin, end) iterations; nullopt if none.
std::optional<double> exploration_fraction(const SearchTrace& trace, int begin, int end);

}  // namespace amcs::search

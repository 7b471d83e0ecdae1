#pragma once

/**
 * Rollouts: sampled continuations of a reasoning prefix.
 *
 * A rollout carries two features used for strategy clustering:
 *   [0] mean per-token negative log-likelihood (nats), the generation confidence
 *   [1] log(token_count + 1e-6), the solution complexity
 *
 * Features are z-scored with statistics fitted on a node's initial batch and
 * frozen for every later rollout of that node.
 *
 * Sources implement RolloutSource. Record i of a call is a function of
 * (prefix, problem, derive_seed(seed, first_index + i)) only, so a node's
 * rollouts form one indexed stream no matter how they are batched.
 */

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "amcs/error.hpp"

namespace amcs::rollout {

inline constexpr double kLengthGuard = 1e-6;  // zeta in log(L + zeta)
inline constexpr double kStdGuard = 1e-8;     // added to sigma before dividing

template <std::size_t D>
using Vec = std::array<double, D>;
using Feature = Vec<2>;

struct Problem {
  std::string id;
  std::string statement;
  std::string gold_answer;
  int statement_length = 1;  // L_p, whitespace tokens of the statement
};

/// Builds a Problem and measures L_p. Empty id or statement is an invalid-problem error.
Problem make_problem(std::string id, std::string statement, std::string gold_answer);

/// Reads problems JSONL (`id`, `problem`, `answer` per line). Ids must be unique.
std::vector<Problem> load_problems(const std::string& path);

enum class SourceTag { simulated, remote };

const char* to_string(SourceTag tag);

struct RolloutRecord {
  std::vector<std::string> steps;
  int token_count = 1;
  double mean_nll = 0.0;
  bool success = false;
  Feature raw_features{};
  std::optional<Feature> std_features;
  SourceTag source_tag = SourceTag::simulated;
  // Set when the provider returned no log-probabilities and mean_nll is the 0.0 fallback.
  bool nll_fallback = false;

  bool operator==(const RolloutRecord&) const = default;
};

/// Population mean / standard deviation per dimension.
template <std::size_t D>
struct FeatureStats {
  Vec<D> mean{};
  Vec<D> std{};

  bool operator==(const FeatureStats&) const = default;
};

/// Returns [mean_nll, log(token_count + 1e-6)] and stores it on the record.
Feature extract_features(RolloutRecord& rollout);

template <std::size_t D>
FeatureStats<D> fit_feature_stats(std::span<const Vec<D>> points) {
  if (points.empty()) {
    throw Error(ErrorCode::empty_sample, "cannot fit feature statistics on an empty sample");
  }
  FeatureStats<D> stats;
  const double n = static_cast<double>(points.size());
  for (std::size_t d = 0; d < D; ++d) {
    double sum = 0.0;
    for (const auto& p : points) sum += p[d];
    const double mean = sum / n;
    double sq = 0.0;
    for (const auto& p : points) sq += (p[d] - mean) * (p[d] - mean);
    stats.mean[d] = mean;
    stats.std[d] = std::sqrt(sq / n);
  }
  return stats;
}

/// Fits on the records' raw_features.
FeatureStats<2> fit_feature_stats(std::span<const RolloutRecord> rollouts);

template <std::size_t D>
Vec<D> standardize(const Vec<D>& v, const FeatureStats<D>& stats) {
  Vec<D> out{};
  for (std::size_t d = 0; d < D; ++d) {
    out[d] = (v[d] - stats.mean[d]) / (stats.std[d] + kStdGuard);
  }
  return out;
}

class RolloutSource {
public:
  virtual ~RolloutSource() = default;

  /**
   * Returns exactly `count` rollouts continuing `prefix`.
   *
   * Record i is drawn with seed derive_seed(seed, first_index + i). Callers
   * that extend a stream pass the number of rollouts already drawn as
   * `first_index`.
   */
  virtual std::vector<RolloutRecord> generate(std::span<const std::string> prefix,
                                              const Problem& problem, int count,
                                              std::uint64_t seed,
                                              std::uint64_t first_index = 0) const = 0;
};

// ---------------------------------------------------------------------------
// Simulated oracle
// ---------------------------------------------------------------------------

struct MixtureComponent {
  double weight = 1.0;
  double mean = 0.0;
  double stddev = 0.0;

  bool operator==(const MixtureComponent&) const = default;
};

/**
 * Synthetic ground truth for one node.
 *
 * When nll_mixture and length_mixture have the same number of components they
 * are drawn jointly: one component index k per rollout is the rollout's
 * "strategy". Optional per-strategy vectors then refine the draw:
 *   strategy_success[k]  success probability of strategy k; the weighted mean
 *                        must equal true_success_prob
 *   strategy_steps[k]    first step text emitted by strategy k
 */
struct SimNodeSpec {
  double true_success_prob = 0.5;
  std::vector<MixtureComponent> nll_mixture;
  std::vector<MixtureComponent> length_mixture;  // mean/stddev of log token length
  std::vector<double> strategy_success;
  std::vector<std::string> strategy_steps;

  bool joint() const { return nll_mixture.size() == length_mixture.size(); }
  void validate() const;
};

/// Default feature mixtures: three strategies separated in both features.
SimNodeSpec default_sim_spec(double true_success_prob);

std::vector<RolloutRecord> sim_generate(const SimNodeSpec& spec,
                                        std::span<const std::string> prefix,
                                        const Problem& problem, int count, std::uint64_t seed,
                                        std::uint64_t first_index = 0);

/// Maps a (problem, prefix) pair to the ground truth of that node.
class SimWorld {
public:
  virtual ~SimWorld() = default;
  virtual SimNodeSpec node_spec(const Problem& problem,
                                std::span<const std::string> prefix) const = 0;
};

/// Same spec for every node; used for single-node forests.
class FixedSpecWorld : public SimWorld {
public:
  explicit FixedSpecWorld(SimNodeSpec spec);
  SimNodeSpec node_spec(const Problem&, std::span<const std::string>) const override {
    return spec_;
  }

private:
  SimNodeSpec spec_;
};

struct SimWorldConfig {
  std::uint64_t seed = 0;
  int strategies = 3;
  // Maximum deviation of a strategy's success probability from the node value.
  double spread = 0.3;
  // Root value; drawn from the problem id when unset.
  std::optional<double> root_p;
  // Explicit root strategies (equal weights). Overrides root_p when set.
  std::vector<double> root_strategy_success;

  void validate() const;
};

/**
 * A deterministic reasoning tree keyed by hashes of the problem and prefix.
 *
 * Each node has `strategies` first-step options. The success probability of
 * option k is the value of the child reached through it, and the options'
 * weighted mean equals the node's own value, so a node's value is exactly
 * the success rate of rollouts drawn from it.
 */
class HashedSimWorld : public SimWorld {
public:
  explicit HashedSimWorld(SimWorldConfig config);
  SimNodeSpec node_spec(const Problem& problem,
                        std::span<const std::string> prefix) const override;
  const SimWorldConfig& config() const { return config_; }

private:
  SimNodeSpec spec_at(std::uint64_t path_hash, std::size_t depth, double value) const;

  SimWorldConfig config_;
};

class SimulatedSource : public RolloutSource {
public:
  explicit SimulatedSource(std::shared_ptr<const SimWorld> world);

  std::vector<RolloutRecord> generate(std::span<const std::string> prefix,
                                      const Problem& problem, int count, std::uint64_t seed,
                                      std::uint64_t first_index = 0) const override;

  const SimWorld& world() const { return *world_; }

private:
  std::shared_ptr<const SimWorld> world_;
};

}  // namespace amcs::rollout

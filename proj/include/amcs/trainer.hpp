#pragma once

/**
 * Soft-label scorer: a linear model with a sigmoid output trained by binary
 * cross-entropy against continuous value targets.
 *
 *   loss(pred, mu) = -[ mu ln(pred) + (1 - mu) ln(1 - pred) ]
 *   dL/dw = mean (pred - mu) x,   dL/db = mean (pred - mu)
 *
 * Examples are built from supervision records with four features
 * (step_index, prefix tokens, search depth, n_total), standardized with
 * statistics fitted on the training set.
 */

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "amcs/dataset.hpp"
#include "amcs/rollout.hpp"

namespace amcs::trainer {

inline constexpr double kProbClamp = 1e-12;
inline constexpr std::size_t kRecordFeatures = 4;
inline constexpr std::array<const char*, kRecordFeatures> kFeatureNames = {
    "step_index", "prefix_tokens", "search_depth", "n_total"};

struct LinearScorer {
  std::vector<double> weights;
  double bias = 0.0;

  LinearScorer() = default;
  explicit LinearScorer(std::size_t dim) : weights(dim, 0.0) {}
  std::size_t dim() const { return weights.size(); }
};

struct TrainConfig {
  double learning_rate = 0.05;
  int epochs = 200;
  int batch_size = 32;
  std::uint64_t seed = 0;

  /// Throws invalid_config naming the offending `trainer.*` key.
  void validate() const;
};

struct TrainingExample {
  std::vector<double> features;
  double target = 0.0;
};

struct Gradient {
  std::vector<double> weights;
  double bias = 0.0;
};

double sigmoid(double x);

/// sigmoid(w.x + b). Throws shape on a dimension mismatch.
double score(const LinearScorer& model, std::span<const double> features);

/// Prediction is clamped to [1e-12, 1 - 1e-12] before taking logs.
double bce_soft_loss(double pred, double target);

/// Mean loss over a batch.
double batch_loss(const LinearScorer& model, std::span<const TrainingExample> batch);

Gradient loss_gradient(const LinearScorer& model, std::span<const TrainingExample> batch);

struct TrainResult {
  LinearScorer model;
  double initial_loss = 0.0;
  std::vector<double> loss_curve;  // full-set mean loss after each epoch
};

/// Mini-batch gradient descent from a zero model; batches follow a seeded shuffle.
TrainResult train(std::span<const TrainingExample> examples, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Record featurization and checkpoints
// ---------------------------------------------------------------------------

rollout::Vec<kRecordFeatures> raw_record_features(const dataset::SupervisionRecord& record);

struct TrainingSet {
  std::vector<TrainingExample> examples;
  rollout::FeatureStats<kRecordFeatures> stats;
};

/// Throws empty_dataset when there are no records.
TrainingSet make_training_set(std::span<const dataset::SupervisionRecord> records);

struct Checkpoint {
  LinearScorer model;
  rollout::FeatureStats<kRecordFeatures> stats;
  std::vector<std::string> feature_names;
};

/// Plain-text key/value file; values round-trip exactly.
void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace amcs::trainer

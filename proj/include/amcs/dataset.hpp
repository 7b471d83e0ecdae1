#pragma once

/**
 * Supervision records: JSONL export/import and descriptive statistics.
 *
 * JSONL field order is fixed:
 *   problem_id, problem, prefix_steps, step_index, mu_hat, n_total,
 *   termination_reason, per_cluster, search_depth, generator_tag, seed
 *
 * Value buckets are [0,.2) [.2,.4) [.4,.6) [.6,.8) [.8,1].
 */

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "amcs/estimation.hpp"

namespace amcs::dataset {

inline constexpr std::size_t kBuckets = 5;
inline constexpr std::array<double, kBuckets + 1> kBucketEdges = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
inline constexpr int kTokensPerStepBin = 10;

/// Left-closed, right-open buckets except the last, which includes 1.0.
std::size_t value_bucket(double mu);

struct SupervisionRecord {
  std::string problem_id;
  std::string problem_text;
  std::vector<std::string> prefix_steps;
  int step_index = 0;
  double mu_hat = 0.0;
  int n_total = 0;
  estimation::TerminationReason termination_reason = estimation::TerminationReason::budget;
  std::vector<estimation::ClusterSummary> per_cluster;
  int search_depth = 0;
  std::string generator_tag;
  std::uint64_t seed = 0;

  bool operator==(const SupervisionRecord&) const = default;
};

/// Throws validation errors for invariant breaches (step_index, mu_hat range).
void validate(const SupervisionRecord& record);

std::string to_json_line(const SupervisionRecord& record);
SupervisionRecord from_json_line(const std::string& line);

/// Writes one compact JSON object per line. Returns the number of lines written.
std::size_t export_jsonl(std::span<const SupervisionRecord> records, const std::string& path);

std::vector<SupervisionRecord> import_jsonl(const std::string& path);

struct BucketStats {
  int count = 0;
  double mean_rollouts = 0.0;
  double mean_depth = 0.0;
  double mean_nodes = 0.0;  // estimated nodes in this bucket per problem
};

struct DatasetStats {
  int record_count = 0;
  int problem_count = 0;
  std::map<int, int> step_count_histogram;         // steps -> records
  std::map<int, int> tokens_per_step_histogram;    // bin lower edge -> records
  double mean_steps = 0.0;
  double mean_tokens_per_step = 0.0;               // total prefix tokens / total prefix steps
  std::array<BucketStats, kBuckets> buckets{};
};

/// Mergeable running sums behind compute_stats, so shards can be combined.
class StatsAccumulator {
public:
  void add(const SupervisionRecord& record);
  void merge(const StatsAccumulator& other);
  DatasetStats finish() const;
  int count() const { return records_; }

private:
  struct BucketSums {
    int count = 0;
    double rollouts = 0.0;
    double depth = 0.0;
  };

  int records_ = 0;
  long long steps_ = 0;
  long long tokens_ = 0;
  std::map<int, int> step_hist_;
  std::map<int, int> token_hist_;
  std::array<BucketSums, kBuckets> buckets_{};
  std::set<std::string> problems_;
};

DatasetStats compute_stats(std::span<const SupervisionRecord> records);

struct AllocationRow {
  double bucket_lo = 0.0;
  double bucket_hi = 0.0;
  int count = 0;
  std::optional<double> mean_rollouts;  // absent when the bucket is empty
  std::optional<double> mean_depth;
  std::optional<double> mean_nodes;
};

struct AllocationReport {
  std::array<AllocationRow, kBuckets> rows{};
  // mean n_total in [.4,.6) over mean n_total in [0,.2) and [.8,1]
  std::optional<double> mid_extreme_ratio;
};

AllocationReport allocation_report(std::span<const SupervisionRecord> records);

/// bucket_lo,bucket_hi,mean_rollouts,mean_depth,mean_nodes,count
void write_allocation_csv(const AllocationReport& report, const std::string& path);

std::string stats_to_json(const DatasetStats& stats, const AllocationReport& report);

}  // namespace amcs::dataset

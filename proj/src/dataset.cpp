#include "amcs/dataset.hpp"

#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "amcs/error.hpp"
#include "amcs/text.hpp"

namespace amcs::dataset {

using ordered_json = nlohmann::ordered_json;

std::size_t value_bucket(double mu) {
  std::size_t b = 0;
  while (b + 1 < kBuckets && mu >= kBucketEdges[b + 1]) ++b;
  return b;
}

void validate(const SupervisionRecord& record) {
  if (!(record.mu_hat >= 0.0 && record.mu_hat <= 1.0)) {
    throw Error(ErrorCode::validation, fmt::format("mu_hat {} outside [0,1]", record.mu_hat));
  }
  if (record.step_index != static_cast<int>(record.prefix_steps.size())) {
    throw Error(ErrorCode::validation,
                fmt::format("step_index {} does not match {} prefix steps", record.step_index,
                            record.prefix_steps.size()));
  }
  if (record.n_total < 0 || record.search_depth < 0) {
    throw Error(ErrorCode::validation, "n_total and search_depth must be non-negative");
  }
}

std::string to_json_line(const SupervisionRecord& record) {
  ordered_json j;
  j["problem_id"] = record.problem_id;
  j["problem"] = record.problem_text;
  j["prefix_steps"] = record.prefix_steps;
  j["step_index"] = record.step_index;
  j["mu_hat"] = record.mu_hat;
  j["n_total"] = record.n_total;
  j["termination_reason"] = estimation::to_string(record.termination_reason);
  auto clusters = ordered_json::array();
  for (const auto& c : record.per_cluster) {
    ordered_json cj;
    cj["n"] = c.n;
    cj["s"] = c.s;
    cj["p_hat"] = c.p_hat;
    cj["delta"] = c.delta;
    clusters.push_back(std::move(cj));
  }
  j["per_cluster"] = std::move(clusters);
  j["search_depth"] = record.search_depth;
  j["generator_tag"] = record.generator_tag;
  j["seed"] = record.seed;
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

SupervisionRecord from_json_line(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  SupervisionRecord r;
  r.problem_id = j.at("problem_id").get<std::string>();
  r.problem_text = j.at("problem").get<std::string>();
  r.prefix_steps = j.at("prefix_steps").get<std::vector<std::string>>();
  r.step_index = j.at("step_index").get<int>();
  r.mu_hat = j.at("mu_hat").get<double>();
  r.n_total = j.at("n_total").get<int>();
  const auto reason = j.at("termination_reason").get<std::string>();
  auto parsed = estimation::termination_reason_from_string(reason);
  if (!parsed) throw Error(ErrorCode::validation, "unknown termination_reason '" + reason + "'");
  r.termination_reason = *parsed;
  for (const auto& cj : j.at("per_cluster")) {
    r.per_cluster.push_back({cj.at("n").get<int>(), cj.at("s").get<int>(),
                             cj.at("p_hat").get<double>(), cj.at("delta").get<double>()});
  }
  r.search_depth = j.at("search_depth").get<int>();
  r.generator_tag = j.at("generator_tag").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  validate(r);
  return r;
}

std::size_t export_jsonl(std::span<const SupervisionRecord> records, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing", 0);
  std::size_t written = 0;
  for (const auto& record : records) {
    out << to_json_line(record) << '\n';
    if (!out) throw IoError("write to " + path + " failed", written);
    ++written;
  }
  out.flush();
  if (!out) throw IoError("flush of " + path + " failed", written);
  return written;
}

std::vector<SupervisionRecord> import_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::input, "cannot open dataset " + path);
  std::vector<SupervisionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t line_offset = offset;
    offset += line.size() + 1;
    if (text::trim(line).empty()) continue;
    try {
      records.push_back(from_json_line(line));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, line_offset, e.what());
    } catch (const Error& e) {
      throw Error(e.code(),
                  fmt::format("line {} (byte {}): {}", line_no, line_offset, e.what()));
    }
  }
  return records;
}

// ---------------------------------------------------------------------------

void StatsAccumulator::add(const SupervisionRecord& record) {
  ++records_;
  const int steps = static_cast<int>(record.prefix_steps.size());
  int tokens = 0;
  for (const auto& s : record.prefix_steps) tokens += text::count_tokens(s);
  steps_ += steps;
  tokens_ += tokens;
  ++step_hist_[steps];
  const int per_step = steps > 0 ? tokens / steps : 0;
  ++token_hist_[per_step / kTokensPerStepBin * kTokensPerStepBin];
  auto& b = buckets_[value_bucket(record.mu_hat)];
  ++b.count;
  b.rollouts += record.n_total;
  b.depth += record.search_depth;
  problems_.insert(record.problem_id);
}

void StatsAccumulator::merge(const StatsAccumulator& other) {
  records_ += other.records_;
  steps_ += other.steps_;
  tokens_ += other.tokens_;
  for (const auto& [k, v] : other.step_hist_) step_hist_[k] += v;
  for (const auto& [k, v] : other.token_hist_) token_hist_[k] += v;
  for (std::size_t i = 0; i < kBuckets; ++i) {
    buckets_[i].count += other.buckets_[i].count;
    buckets_[i].rollouts += other.buckets_[i].rollouts;
    buckets_[i].depth += other.buckets_[i].depth;
  }
  problems_.insert(other.problems_.begin(), other.problems_.end());
}

DatasetStats StatsAccumulator::finish() const {
  if (records_ == 0) throw Error(ErrorCode::empty_dataset, "empty dataset");
  DatasetStats stats;
  stats.record_count = records_;
  stats.problem_count = static_cast<int>(problems_.size());
  stats.step_count_histogram = step_hist_;
  stats.tokens_per_step_histogram = token_hist_;
  stats.mean_steps = static_cast<double>(steps_) / records_;
  stats.mean_tokens_per_step = steps_ > 0 ? static_cast<double>(tokens_) / steps_ : 0.0;
  for (std::size_t i = 0; i < kBuckets; ++i) {
    const auto& b = buckets_[i];
    auto& out = stats.buckets[i];
    out.count = b.count;
    if (b.count > 0) {
      out.mean_rollouts = b.rollouts / b.count;
      out.mean_depth = b.depth / b.count;
      out.mean_nodes = static_cast<double>(b.count) / stats.problem_count;
    }
  }
  return stats;
}

DatasetStats compute_stats(std::span<const SupervisionRecord> records) {
  StatsAccumulator acc;
  for (const auto& r : records) acc.add(r);
  return acc.finish();
}

AllocationReport allocation_report(std::span<const SupervisionRecord> records) {
  const auto stats = compute_stats(records);
  AllocationReport report;
  for (std::size_t i = 0; i < kBuckets; ++i) {
    auto& row = report.rows[i];
    const auto& b = stats.buckets[i];
    row.bucket_lo = kBucketEdges[i];
    row.bucket_hi = kBucketEdges[i + 1];
    row.count = b.count;
    if (b.count > 0) {
      row.mean_rollouts = b.mean_rollouts;
      row.mean_depth = b.mean_depth;
      row.mean_nodes = b.mean_nodes;
    }
  }
  const auto& low = stats.buckets.front();
  const auto& mid = stats.buckets[2];
  const auto& high = stats.buckets.back();
  const int extreme_count = low.count + high.count;
  if (mid.count > 0 && extreme_count > 0) {
    const double extreme_mean =
        (low.mean_rollouts * low.count + high.mean_rollouts * high.count) / extreme_count;
    report.mid_extreme_ratio = mid.mean_rollouts / extreme_mean;
  }
  return report;
}

void write_allocation_csv(const AllocationReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing", 0);
  auto opt = [](const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(); };
  out << "bucket_lo,bucket_hi,mean_rollouts,mean_depth,mean_nodes,count\n";
  std::size_t written = 0;
  for (const auto& row : report.rows) {
    out << fmt::format("{},{},{},{},{},{}\n", row.bucket_lo, row.bucket_hi,
                       opt(row.mean_rollouts), opt(row.mean_depth), opt(row.mean_nodes),
                       row.count);
    if (!out) throw IoError("write to " + path + " failed", written);
    ++written;
  }
}

std::string stats_to_json(const DatasetStats& stats, const AllocationReport& report) {
  ordered_json j;
  j["record_count"] = stats.record_count;
  j["problem_count"] = stats.problem_count;
  j["mean_steps"] = stats.mean_steps;
  j["mean_tokens_per_step"] = stats.mean_tokens_per_step;
  auto hist = [](const std::map<int, int>& h) {
    auto arr = ordered_json::array();
    for (const auto& [k, v] : h) arr.push_back(ordered_json::array({k, v}));
    return arr;
  };
  j["step_count_histogram"] = hist(stats.step_count_histogram);
  j["tokens_per_step_histogram"] = hist(stats.tokens_per_step_histogram);
  auto rows = ordered_json::array();
  for (const auto& row : report.rows) {
    ordered_json r;
    r["bucket_lo"] = row.bucket_lo;
    r["bucket_hi"] = row.bucket_hi;
    r["count"] = row.count;
    r["mean_rollouts"] = row.mean_rollouts ? ordered_json(*row.mean_rollouts) : ordered_json();
    r["mean_depth"] = row.mean_depth ? ordered_json(*row.mean_depth) : ordered_json();
    r["mean_nodes"] = row.mean_nodes ? ordered_json(*row.mean_nodes) : ordered_json();
    rows.push_back(std::move(r));
  }
  j["allocation"] = std::move(rows);
  j["mid_extreme_ratio"] =
      report.mid_extreme_ratio ? ordered_json(*report.mid_extreme_ratio) : ordered_json();
  return j.dump(2);
}

}  // namespace amcs::dataset

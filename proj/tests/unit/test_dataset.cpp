#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "amcs/dataset.hpp"
#include "amcs/error.hpp"
#include "amcs/random.hpp"

using namespace amcs;
using namespace amcs::dataset;

namespace {

std::string temp_path(const std::string& name) { return "/tmp/amcs_unit_" + name; }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SupervisionRecord record(const std::string& id, int steps, double mu, int n, int depth = 1) {
  SupervisionRecord r;
  r.problem_id = id;
  r.problem_text = "problem " + id;
  for (int i = 0; i < steps; ++i) r.prefix_steps.push_back("step " + std::to_string(i) + " here");
  r.step_index = steps;
  r.mu_hat = mu;
  r.n_total = n;
  r.search_depth = depth;
  r.generator_tag = "test";
  return r;
}

std::string random_text(Rng& rng) {
  static const std::string alphabet = "ab Z9\"\\/\n\t{}:,é∑";
  std::string s;
  const int len = static_cast<int>(uniform01(rng) * 12);
  for (int i = 0; i < len; ++i) {
    const auto k = static_cast<std::size_t>(uniform01(rng) * 14);
    if (k == 12) {
      s += "é";
    } else if (k == 13) {
      s += "∑";
    } else {
      s += alphabet[k];
    }
  }
  return s;
}

SupervisionRecord random_record(Rng& rng) {
  SupervisionRecord r;
  r.problem_id = random_text(rng) + "id";
  r.problem_text = random_text(rng);
  const int steps = static_cast<int>(uniform01(rng) * 5);
  for (int i = 0; i < steps; ++i) r.prefix_steps.push_back(random_text(rng));
  r.step_index = steps;
  r.mu_hat = uniform01(rng);
  r.n_total = static_cast<int>(uniform01(rng) * 40);
  r.termination_reason = static_cast<estimation::TerminationReason>(static_cast<int>(uniform01(rng) * 3));
  const int k = static_cast<int>(uniform01(rng) * 4);
  for (int j = 0; j < k; ++j) {
    const int n = 1 + static_cast<int>(uniform01(rng) * 16);
    const int s = static_cast<int>(uniform01(rng) * (n + 1));
    r.per_cluster.push_back({n, s, static_cast<double>(s) / n, uniform01(rng)});
  }
  r.search_depth = steps;
  r.generator_tag = random_text(rng);
  r.seed = rng();
  return r;
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("value buckets are left-closed") {
    CHECK(value_bucket(0.0) == 0);
    CHECK(value_bucket(0.2) == 1);
    CHECK(value_bucket(0.3999) == 1);
    CHECK(value_bucket(0.4) == 2);
    CHECK(value_bucket(0.8) == 4);
    CHECK(value_bucket(1.0) == 4);
  }

  TEST_CASE("export examples") {
    const auto path = temp_path("export.jsonl");
    CHECK(export_jsonl({}, path) == 0);
    CHECK(slurp(path).empty());

    const std::vector<SupervisionRecord> rs = {record("a", 1, 0.5, 16), record("a", 2, 0.25, 20),
                                               record("b", 3, 1.0, 16)};
    CHECK(export_jsonl(rs, path) == 3);
    const auto first = slurp(path);
    CHECK(std::count(first.begin(), first.end(), '\n') == 3);
    CHECK(first.back() == '\n');
    CHECK(first.rfind("{\"problem_id\":\"a\",\"problem\":\"problem a\",\"prefix_steps\":", 0) == 0);
    export_jsonl(rs, path);
    CHECK(slurp(path) == first);
    CHECK(import_jsonl(path) == rs);
  }

  TEST_CASE("field order is fixed") {
    const auto line = to_json_line(record("x", 1, 0.5, 8));
    const std::vector<std::string> keys = {"problem_id",    "problem",           "prefix_steps",
                                           "step_index",    "mu_hat",            "n_total",
                                           "termination_reason", "per_cluster", "search_depth",
                                           "generator_tag", "seed"};
    std::size_t pos = 0;
    for (const auto& k : keys) {
      const auto at = line.find("\"" + k + "\":", pos);
      REQUIRE(at != std::string::npos);
      pos = at;
    }
  }

  TEST_CASE("randomized round trip") {
    Rng rng(12345);
    std::vector<SupervisionRecord> rs;
    for (int i = 0; i < 300; ++i) rs.push_back(random_record(rng));
    const auto path = temp_path("roundtrip.jsonl");
    export_jsonl(rs, path);
    CHECK(import_jsonl(path) == rs);
    for (const auto& r : rs) CHECK(from_json_line(to_json_line(r)) == r);
  }

  TEST_CASE("corrupted line is reported") {
    const auto path = temp_path("corrupt.jsonl");
    const std::vector<SupervisionRecord> rs = {record("a", 1, 0.5, 16), record("b", 1, 0.5, 16)};
    export_jsonl(rs, path);
    auto text = slurp(path);
    const auto first_len = text.find('\n') + 1;
    text.insert(first_len, "{\"problem_id\": broken\n");
    std::ofstream(path, std::ios::binary) << text;
    try {
      import_jsonl(path);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
      CHECK(e.byte_offset() == first_len);
    }
  }

  TEST_CASE("invariant breaches are validation errors") {
    auto r = record("a", 1, 0.5, 16);
    auto line = to_json_line(r);
    const auto at = line.find("\"mu_hat\":0.5");
    REQUIRE(at != std::string::npos);
    line.replace(at, 12, "\"mu_hat\":1.3");
    const auto path = temp_path("invalid.jsonl");
    std::ofstream(path, std::ios::binary) << line << '\n';
    try {
      import_jsonl(path);
      FAIL("expected a validation error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::validation);
    }
    r.step_index = 4;
    CHECK_THROWS_AS(validate(r), Error);
  }

  TEST_CASE("compute_stats examples") {
    const std::vector<SupervisionRecord> one = {record("a", 5, 0.5, 16)};
    CHECK(compute_stats(one).mean_steps == 5.0);
    const std::vector<SupervisionRecord> two = {record("a", 4, 0.5, 16), record("a", 8, 0.5, 16)};
    const auto stats = compute_stats(two);
    CHECK(stats.mean_steps == 6.0);
    CHECK(stats.mean_tokens_per_step == 3.0);
    CHECK(stats.problem_count == 1);
    try {
      compute_stats(std::vector<SupervisionRecord>{});
      FAIL("expected empty dataset error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::empty_dataset);
    }
  }

  TEST_CASE("stats properties: histograms, permutation, sharding") {
    Rng rng(7);
    std::vector<SupervisionRecord> rs;
    for (int i = 0; i < 200; ++i) rs.push_back(random_record(rng));
    const auto stats = compute_stats(rs);
    int steps_total = 0;
    for (const auto& [k, v] : stats.step_count_histogram) steps_total += v;
    int tokens_total = 0;
    for (const auto& [k, v] : stats.tokens_per_step_histogram) tokens_total += v;
    int bucket_total = 0;
    for (const auto& b : stats.buckets) bucket_total += b.count;
    CHECK(steps_total == 200);
    CHECK(tokens_total == 200);
    CHECK(bucket_total == 200);

    auto shuffled = rs;
    std::reverse(shuffled.begin(), shuffled.end());
    std::rotate(shuffled.begin(), shuffled.begin() + 37, shuffled.end());
    const auto permuted = compute_stats(shuffled);
    CHECK(permuted.step_count_histogram == stats.step_count_histogram);
    CHECK(permuted.tokens_per_step_histogram == stats.tokens_per_step_histogram);
    CHECK(permuted.mean_steps == doctest::Approx(stats.mean_steps).epsilon(1e-12));
    for (std::size_t b = 0; b < kBuckets; ++b) {
      CHECK(permuted.buckets[b].count == stats.buckets[b].count);
      CHECK(permuted.buckets[b].mean_rollouts ==
            doctest::Approx(stats.buckets[b].mean_rollouts).epsilon(1e-12));
    }

    StatsAccumulator left;
    StatsAccumulator right;
    for (std::size_t i = 0; i < rs.size(); ++i) (i % 3 == 0 ? left : right).add(rs[i]);
    left.merge(right);
    const auto merged = left.finish();
    CHECK(merged.record_count == 200);
    CHECK(merged.problem_count == stats.problem_count);
    CHECK(merged.step_count_histogram == stats.step_count_histogram);
    CHECK(merged.mean_tokens_per_step == doctest::Approx(stats.mean_tokens_per_step).epsilon(1e-12));
  }

  TEST_CASE("allocation report examples") {
    std::vector<SupervisionRecord> one_bucket = {record("a", 1, 0.5, 16), record("a", 1, 0.45, 20)};
    const auto single = allocation_report(one_bucket);
    CHECK_FALSE(single.mid_extreme_ratio.has_value());
    CHECK(single.rows[2].count == 2);
    CHECK_FALSE(single.rows[0].mean_rollouts.has_value());

    const std::vector<SupervisionRecord> fig = {record("a", 1, 0.5, 20), record("a", 1, 0.1, 7),
                                                record("a", 1, 0.9, 7)};
    const auto report = allocation_report(fig);
    REQUIRE(report.mid_extreme_ratio.has_value());
    CHECK(*report.mid_extreme_ratio == doctest::Approx(20.0 / 7.0).epsilon(1e-12));
    CHECK(*report.mid_extreme_ratio == doctest::Approx(2.86).epsilon(1e-3));

    const std::vector<SupervisionRecord> uniform = {record("a", 1, 0.05, 16), record("a", 1, 0.5, 16),
                                                    record("a", 1, 0.7, 16), record("b", 1, 1.0, 16)};
    CHECK(*allocation_report(uniform).mid_extreme_ratio == 1.0);
  }

  TEST_CASE("fixture statistics match the independent script") {
    const auto rs = import_jsonl(std::string(AMCS_FIXTURES_DIR) + "/dataset_small.jsonl");
    const auto stats = compute_stats(rs);
    CHECK(stats.record_count == 41);
    CHECK(stats.problem_count == 3);
    CHECK(stats.mean_steps == doctest::Approx(2.268292682926829).epsilon(1e-12));
    CHECK(stats.mean_tokens_per_step == doctest::Approx(16.451612903225808).epsilon(1e-12));
    CHECK(stats.step_count_histogram == std::map<int, int>{{1, 7}, {2, 16}, {3, 18}});
    CHECK(stats.tokens_per_step_histogram == std::map<int, int>{{10, 35}, {20, 6}});

    const std::array<int, 5> counts = {25, 7, 6, 3, 0};
    const std::array<double, 4> rollouts = {25.16, 33.857142857142854, 34.5, 32.666666666666664};
    const std::array<double, 4> depth = {2.2, 2.2857142857142856, 2.3333333333333335,
                                         2.6666666666666665};
    const std::array<double, 4> nodes = {8.333333333333334, 2.3333333333333335, 2.0, 1.0};
    const auto report = allocation_report(rs);
    for (std::size_t b = 0; b < 5; ++b) {
      CHECK(report.rows[b].count == counts[b]);
      if (b < 4) {
        CHECK(*report.rows[b].mean_rollouts == doctest::Approx(rollouts[b]).epsilon(1e-12));
        CHECK(*report.rows[b].mean_depth == doctest::Approx(depth[b]).epsilon(1e-12));
        CHECK(*report.rows[b].mean_nodes == doctest::Approx(nodes[b]).epsilon(1e-12));
      }
    }
    CHECK_FALSE(report.rows[4].mean_rollouts.has_value());
    CHECK(*report.mid_extreme_ratio == doctest::Approx(1.3712241653418125).epsilon(1e-12));
  }

  TEST_CASE("allocation csv layout") {
    const std::vector<SupervisionRecord> rs = {record("a", 1, 0.5, 20), record("a", 1, 0.1, 7)};
    const auto path = temp_path("allocation.csv");
    write_allocation_csv(allocation_report(rs), path);
    const auto csv = slurp(path);
    CHECK(csv.rfind("bucket_lo,bucket_hi,mean_rollouts,mean_depth,mean_nodes,count\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
  }
}

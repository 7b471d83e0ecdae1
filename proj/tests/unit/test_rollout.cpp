#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "amcs/answer.hpp"
#include "amcs/clustering.hpp"
#include "amcs/error.hpp"
#include "amcs/random.hpp"
#include "amcs/rollout.hpp"
#include "amcs/text.hpp"

using namespace amcs;
using namespace amcs::rollout;

namespace {

Problem problem() { return make_problem("p", "Find the value of x.", "42"); }

std::string write_temp(const std::string& name, const std::string& content) {
  const std::string path = std::string("/tmp/amcs_unit_") + name;
  std::ofstream(path, std::ios::binary) << content;
  return path;
}

}  // namespace

TEST_SUITE("text") {
  TEST_CASE("token counting and splitting") {
    CHECK(text::count_tokens("") == 0);
    CHECK(text::count_tokens("  a  b\tc\n d ") == 4);
    CHECK(text::split_steps("a\n\nb\n\nc", "\n\n") == std::vector<std::string>{"a", "b", "c"});
    CHECK(text::split_steps("single step", "\n\n") == std::vector<std::string>{"single step"});
    CHECK(text::split_steps("a\n\n\n\nb", "\n\n") == std::vector<std::string>{"a", "b"});
    CHECK(text::split_steps("  \n\n  ", "\n\n").empty());
    CHECK(text::trim("  x y  ") == "x y");
  }
}

TEST_SUITE("answer") {
  TEST_CASE("check_answer examples") {
    CHECK(answer::check_answer("The answer is 1/2", "0.5"));
    CHECK(answer::check_answer("so 6 * 7 = 42", "42"));
    CHECK_FALSE(answer::check_answer("no answer given", "7"));
    CHECK(answer::check_answer("The final value is \\boxed{\\frac{3}{4}}.", "0.75"));
    CHECK(answer::check_answer("answer: 1,000", "1000"));
    CHECK(answer::check_answer("Therefore the answer is $x = 5$.", "5"));
    CHECK_FALSE(answer::check_answer("The answer is 421.", "42"));
    CHECK(answer::check_answer("The answer is Paris.", "paris"));
  }

  TEST_CASE("extraction order prefers boxed, then marker, then last number") {
    CHECK(answer::extract_final_answer("answer is 3 but \\boxed{5} and 7") == "5");
    CHECK(answer::extract_final_answer("we get 2 then the answer is 9\nand 11") == "9");
    CHECK(answer::extract_final_answer("values 2, 3 and 4") == "4");
    CHECK_FALSE(answer::extract_final_answer("nothing here").has_value());
    CHECK(answer::has_final_answer("The answer is 4."));
    CHECK_FALSE(answer::has_final_answer("Step 1: expand."));
  }

  TEST_CASE("canonical forms of equal rationals agree") {
    CHECK(answer::canonicalize("0.5") == answer::canonicalize("1/2"));
    CHECK(answer::canonicalize("\\dfrac{2}{4}") == "1/2");
    CHECK(answer::canonicalize("-6/4") == "-3/2");
    CHECK(answer::canonicalize("12.") == "12");
  }
}

TEST_SUITE("rollout") {
  TEST_CASE("make_problem measures the statement and rejects empty fields") {
    const auto p = make_problem("a", "What is two plus two?", "4");
    CHECK(p.statement_length == 5);
    CHECK_THROWS_AS(make_problem("", "x", "1"), Error);
    CHECK_THROWS_AS(make_problem("a", "   ", "1"), Error);
    CHECK_THROWS_AS(make_problem("a", "x", ""), Error);
  }

  TEST_CASE("load_problems reads JSONL and reports bad lines") {
    const auto good = write_temp("problems_good.jsonl",
                                 "{\"id\":\"a\",\"problem\":\"one plus one\",\"answer\":\"2\"}\n\n"
                                 "{\"id\":\"b\",\"problem\":\"two times three\",\"answer\":6}\n");
    const auto ps = load_problems(good);
    REQUIRE(ps.size() == 2);
    CHECK(ps[1].gold_answer == "6");

    const auto bad = write_temp("problems_bad.jsonl",
                                "{\"id\":\"a\",\"problem\":\"x\",\"answer\":\"1\"}\n{oops\n");
    try {
      load_problems(bad);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
      CHECK(e.byte_offset() == 38);
    }
    const auto dup = write_temp("problems_dup.jsonl",
                                "{\"id\":\"a\",\"problem\":\"x\",\"answer\":\"1\"}\n"
                                "{\"id\":\"a\",\"problem\":\"y\",\"answer\":\"2\"}\n");
    CHECK_THROWS_AS(load_problems(dup), ParseError);
    CHECK_THROWS_AS(load_problems("/nonexistent/problems.jsonl"), Error);
  }

  TEST_CASE("extract_features guards its inputs") {
    RolloutRecord r;
    r.token_count = 100;
    r.mean_nll = 0.7;
    const auto f = extract_features(r);
    CHECK(f[0] == 0.7);
    CHECK(f[1] == std::log(100.0 + 1e-6));
    r.token_count = 0;
    CHECK_THROWS_AS(extract_features(r), Error);
    r.token_count = 3;
    r.mean_nll = -0.1;
    CHECK_THROWS_AS(extract_features(r), Error);
    r.mean_nll = std::nan("");
    CHECK_THROWS_AS(extract_features(r), Error);
  }

  TEST_CASE("degenerate success probabilities") {
    const auto p = problem();
    for (double q : {0.0, 1.0}) {
      const auto rs = sim_generate(default_sim_spec(q), {}, p, 8, 3);
      REQUIRE(rs.size() == 8);
      for (const auto& r : rs) {
        CHECK(r.success == (q == 1.0));
        CHECK(answer::check_answer(r.steps.back(), p.gold_answer) == r.success);
      }
    }
  }

  TEST_CASE("success fraction at p = 0.7 over 10000 draws") {
    const auto rs = sim_generate(default_sim_spec(0.7), {}, problem(), 10000, 2024);
    int s = 0;
    for (const auto& r : rs) s += r.success ? 1 : 0;
    CHECK(std::abs(s / 10000.0 - 0.7) <= 0.02);
    CHECK(s == 6931);
  }

  TEST_CASE("success counts stay within three binomial deviations") {
    for (double p : {0.1, 0.5, 0.9}) {
      const int n = 100000;
      const auto rs = sim_generate(default_sim_spec(p), {}, problem(), n, 17);
      int s = 0;
      for (const auto& r : rs) s += r.success ? 1 : 0;
      CHECK(std::abs(s - n * p) <= 3.0 * std::sqrt(n * p * (1 - p)));
    }
  }

  TEST_CASE("records are consistent and deterministic") {
    const auto p = problem();
    const auto spec = default_sim_spec(0.4);
    const auto a = sim_generate(spec, {}, p, 50, 9);
    const auto b = sim_generate(spec, {}, p, 50, 9);
    CHECK(a == b);
    for (const auto& r : a) {
      int tokens = 0;
      for (const auto& s : r.steps) tokens += text::count_tokens(s);
      CHECK(tokens == r.token_count);
      CHECK(r.raw_features[1] - std::log(r.token_count + kLengthGuard) == 0.0);
      CHECK(r.raw_features[0] == r.mean_nll);
      CHECK(r.mean_nll >= 0.0);
      CHECK(r.source_tag == SourceTag::simulated);
    }
  }

  TEST_CASE("stream positions do not depend on batching") {
    const auto p = problem();
    const auto spec = default_sim_spec(0.5);
    const auto whole = sim_generate(spec, {}, p, 20, 4);
    auto head = sim_generate(spec, {}, p, 7, 4, 0);
    const auto tail = sim_generate(spec, {}, p, 13, 4, 7);
    head.insert(head.end(), tail.begin(), tail.end());
    CHECK(head == whole);
  }

  TEST_CASE("standardization round trip") {
    std::vector<Feature> pts;
    Rng rng(1);
    for (int i = 0; i < 9; ++i) pts.push_back({uniform01(rng), 3.0 + uniform01(rng)});
    const auto stats = fit_feature_stats<2>(pts);
    const auto zero = standardize(stats.mean, stats);
    CHECK(zero[0] == 0.0);
    CHECK(zero[1] == 0.0);
    std::vector<Feature> zs;
    for (const auto& f : pts) zs.push_back(standardize(f, stats));
    const auto zstats = fit_feature_stats<2>(zs);
    for (int d = 0; d < 2; ++d) {
      CHECK(std::abs(zstats.mean[d]) < 1e-9);
      CHECK(std::abs(zstats.std[d] - 1.0) < 1e-6);
    }
    const auto set = clustering::kmeans_init(zs, 1, 5);
    CHECK(std::abs(set.clusters[0].centroid[0]) < 1e-9);
    CHECK(std::abs(set.clusters[0].centroid[1]) < 1e-9);
    CHECK_THROWS_AS(fit_feature_stats<2>(std::vector<Feature>{}), Error);
  }

  TEST_CASE("node spec validation") {
    auto spec = default_sim_spec(0.5);
    spec.nll_mixture[0].weight = 0.9;
    CHECK_THROWS_AS(spec.validate(), Error);
    auto strat = default_sim_spec(0.5);
    strat.strategy_success = {0.9, 0.1, 0.5};
    CHECK_THROWS_AS(strat.validate(), Error);
  }

  TEST_CASE("hashed world values are consistent down the tree") {
    SimWorldConfig cfg;
    cfg.seed = 3;
    const HashedSimWorld world(cfg);
    const auto p = problem();
    const auto root = world.node_spec(p, {});
    double mean = 0.0;
    for (std::size_t k = 0; k < root.strategy_success.size(); ++k) {
      mean += root.nll_mixture[k].weight * root.strategy_success[k];
      const std::vector<std::string> prefix = {root.strategy_steps[k]};
      const auto child = world.node_spec(p, prefix);
      CHECK(child.true_success_prob == doctest::Approx(root.strategy_success[k]).epsilon(1e-12));
    }
    CHECK(mean == doctest::Approx(root.true_success_prob).epsilon(1e-12));

    SimWorldConfig fixed;
    fixed.root_strategy_success = {0.9, 0.1, 0.2};
    const auto spec = HashedSimWorld(fixed).node_spec(p, {});
    CHECK(spec.true_success_prob == doctest::Approx(0.4));
    CHECK(spec.strategy_success == std::vector<double>{0.9, 0.1, 0.2});
  }

  TEST_CASE("simulated source is deterministic") {
    const SimulatedSource source(std::make_shared<HashedSimWorld>(SimWorldConfig{}));
    const std::vector<std::string> prefix;
    CHECK(source.generate(prefix, problem(), 12, 8) == source.generate(prefix, problem(), 12, 8));
    CHECK(source.generate(prefix, problem(), 0, 8).empty());
  }
}

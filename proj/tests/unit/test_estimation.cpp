#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "amcs/error.hpp"
#include "amcs/estimation.hpp"
#include "amcs/random.hpp"

using namespace amcs;
using namespace amcs::estimation;

namespace {

constexpr double kZExact = 1.959963984540054;  // two-sided 95% normal quantile

clustering::ClusterSet make_set(const std::vector<std::pair<int, int>>& ns) {
  clustering::ClusterSet set;
  int id = 0;
  for (auto [n, s] : ns) {
    clustering::Cluster c;
    c.id = id++;
    c.total = n;
    c.successes = s;
    c.p_hat = n > 0 ? static_cast<double>(s) / n : 0.0;
    c.delta = wilson_delta(s, n);
    set.clusters.push_back(c);
  }
  return set;
}

clustering::ClusterSet with_deltas(const std::vector<std::pair<int, double>>& nd) {
  clustering::ClusterSet set;
  int id = 0;
  for (auto [n, d] : nd) {
    clustering::Cluster c;
    c.id = id++;
    c.total = n;
    c.delta = d;
    set.clusters.push_back(c);
  }
  return set;
}

rollout::Problem problem() { return rollout::make_problem("q", "What is one?", "1"); }

std::shared_ptr<rollout::SimulatedSource> fixed_source(const rollout::SimNodeSpec& spec) {
  return std::make_shared<rollout::SimulatedSource>(std::make_shared<rollout::FixedSpecWorld>(spec));
}

// Every rollout has the same features, so k-means collapses to one cluster.
rollout::SimNodeSpec degenerate_spec(double p) {
  rollout::SimNodeSpec spec;
  spec.true_success_prob = p;
  spec.nll_mixture = {{1.0, 0.5, 0.0}};
  spec.length_mixture = {{1.0, std::log(40.0), 0.0}};
  return spec;
}

}  // namespace

TEST_SUITE("estimation") {
  TEST_CASE("wilson_delta matches a reference statistics implementation") {
    // proportion_confint(method="wilson") half-widths at the exact 95% quantile
    struct Ref {
      int s, n;
      double half;
    };
    const Ref refs[] = {{3, 6, 0.3123836935173494},    {6, 6, 0.1951671439510827},
                        {0, 6, 0.19516714395108273},   {1, 1, 0.3967253428113813},
                        {0, 1, 0.39672534281138133},   {5, 16, 0.2071550015523865},
                        {16, 16, 0.09680384026721833}, {13, 32, 0.1611017014097585},
                        {50, 100, 0.09616846963400438}, {1, 1000, 0.0027330061136659296}};
    for (const auto& r : refs) {
      CAPTURE(r.s);
      CAPTURE(r.n);
      CHECK(wilson_delta(r.s, r.n, kZExact) == doctest::Approx(r.half).epsilon(1e-12));
    }
  }

  TEST_CASE("wilson_delta examples at z = 1.96") {
    CHECK(wilson_delta(3, 6) == doctest::Approx(0.3124).epsilon(1e-4));
    const double z = 1.96;
    CHECK(wilson_delta(6, 6) == doctest::Approx(z * z / (12.0 + 2 * z * z)).epsilon(1e-14));
    CHECK(wilson_delta(6, 6) == doctest::Approx(0.1952).epsilon(1e-4));
    CHECK(wilson_delta(2, 5, 0.0) == 0.0);
    CHECK(wilson_delta(0, 0) == 1.0);
    CHECK_THROWS_AS(wilson_delta(4, 3), Error);
  }

  TEST_CASE("wilson_delta is symmetric, bounded and non-increasing in n") {
    for (int n = 1; n <= 60; ++n) {
      for (int s = 0; s <= n; ++s) {
        const double d = wilson_delta(s, n);
        CHECK(d == doctest::Approx(wilson_delta(n - s, n)).epsilon(1e-14));
        CHECK(d >= 0.0);
        CHECK(d <= kDefaultZ / 2.0);
      }
    }
    for (int n = 1; n < 1000; ++n) {
      CHECK(wilson_delta(n + 1, n + 1) <= wilson_delta(n, n));
      CHECK(wilson_delta(0, n + 1) <= wilson_delta(0, n));
    }
    for (int n = 2; n < 1000; n += 2) CHECK(wilson_delta(n / 2 + 1, n + 2) <= wilson_delta(n / 2, n));
  }

  TEST_CASE("node_delta examples and bounds") {
    const ClusterWeight one[] = {{7, 0.3}};
    CHECK(node_delta(one) == doctest::Approx(0.3).epsilon(1e-15));
    const ClusterWeight two[] = {{5, 0.2}, {5, 0.2}};
    CHECK(node_delta(two) == doctest::Approx(std::sqrt(2 * 0.25 * 0.04)).epsilon(1e-15));
    CHECK(node_delta(two) == doctest::Approx(0.1414).epsilon(1e-4));
    const ClusterWeight zeros[] = {{3, 0.0}, {9, 0.0}};
    CHECK(node_delta(zeros) == 0.0);
    const ClusterWeight empty[] = {{0, 1.0}, {0, 1.0}};
    CHECK_THROWS_AS(node_delta(empty), Error);

    Rng rng(42);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<ClusterWeight> cs;
      double max_d = 0.0;
      const int k = 2 + static_cast<int>(uniform01(rng) * 3);
      for (int j = 0; j < k; ++j) {
        cs.push_back({1 + static_cast<int>(uniform01(rng) * 20), 0.01 + uniform01(rng)});
        max_d = std::max(max_d, cs.back().delta);
      }
      CHECK(node_delta(cs) < max_d);
    }
  }

  TEST_CASE("active_set applies both gates") {
    EstimatorConfig cfg;
    const auto set = with_deltas({{4, 0.3}, {22, 0.3}, {4, 0.05}});
    CHECK(active_set(set, cfg) == std::vector<int>{0});
    CHECK(active_set(with_deltas({{4, 0.05}, {6, 0.1}}), cfg).empty());
  }

  TEST_CASE("select_target picks the largest delta, lowest id on ties") {
    EstimatorConfig cfg;
    CHECK(select_target(with_deltas({{4, 0.2}, {4, 0.4}}), cfg) == 1);
    CHECK(select_target(with_deltas({{4, 0.4}, {4, 0.4}}), cfg) == 0);
    CHECK_FALSE(select_target(with_deltas({{4, 0.01}}), cfg).has_value());
  }

  TEST_CASE("sample_count clamps ceil(gamma * delta)") {
    EstimatorConfig cfg;
    CHECK(sample_count(0.3124, cfg) == 4);
    CHECK(sample_count(0.01, cfg) == 1);
    CHECK(sample_count(1.0, cfg) == 8);
    CHECK(sample_count(0.0, cfg) == 1);
  }

  TEST_CASE("should_terminate checks confidence, budget, convergence in order") {
    EstimatorConfig cfg;
    CHECK(should_terminate({0.08, 10, {0.5}}, cfg) == TerminationReason::confidence);
    CHECK(should_terminate({0.2, 32, {0.5}}, cfg) == TerminationReason::budget);
    CHECK(should_terminate({0.08, 40, {0.05}}, cfg) == TerminationReason::confidence);
    CHECK_FALSE(should_terminate({0.2, 31, {0.5}}, cfg).has_value());

    // Two clusters each just under eps_cluster whose weighted aggregate exceeds eps_node.
    EstimatorConfig tight = cfg;
    tight.eps_node = 0.065;
    const ClusterWeight cs[] = {{10, 0.095}, {10, 0.095}};
    const double agg = node_delta(cs);
    REQUIRE(agg > tight.eps_node);
    CHECK(should_terminate({agg, 20, {0.095, 0.095}}, tight) == TerminationReason::cluster_convergence);

    // With the defaults: all clusters at 0.09 and an aggregate of 0.12.
    CHECK(should_terminate({0.12, 20, {0.09, 0.09, 0.09}}, cfg) ==
          TerminationReason::cluster_convergence);
  }

  TEST_CASE("final_estimate weights clusters by size") {
    auto set = make_set({{4, 2}, {6, 6}});
    CHECK(final_estimate(set) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(final_estimate(make_set({{5, 3}})) == doctest::Approx(0.6));
    CHECK(final_estimate(make_set({{5, 0}, {3, 0}})) == 0.0);
    CHECK_THROWS_AS(final_estimate(make_set({{0, 0}})), Error);
  }

  TEST_CASE("config validation names the key") {
    EstimatorConfig cfg;
    cfg.k_max = 4;
    try {
      cfg.validate();
      FAIL("expected invalid_config");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::invalid_config);
      CHECK(std::string(e.what()).find("estimator.k_max") != std::string::npos);
    }
    EstimatorConfig m;
    m.m_min = 9;
    CHECK_THROWS_AS(m.validate(), Error);
    EstimatorConfig ok;
    CHECK(ok.n_max_cluster == 22);
    CHECK_NOTHROW(ok.validate());
  }

  TEST_CASE("p = 1 node with one effective cluster stops at 16 on confidence") {
    const auto source = fixed_source(degenerate_spec(1.0));
    const auto est = estimate_node({}, problem(), *source, EstimatorConfig{}, 99);
    CHECK(est.mu_hat == 1.0);
    CHECK(est.n_total == 16);
    CHECK(est.per_cluster.size() == 1);
    CHECK(est.termination_reason == TerminationReason::confidence);
    CHECK(est.iterations == 5);  // 6 -> 8 -> 10 -> 12 -> 14 -> 16
  }

  TEST_CASE("p = 0.5 node mostly exhausts the budget") {
    const auto source = fixed_source(rollout::default_sim_spec(0.5));
    int budget = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      const auto est = estimate_node({}, problem(), *source, EstimatorConfig{}, seed);
      if (est.termination_reason == TerminationReason::budget) {
        ++budget;
        CHECK(est.n_total >= 32);
      }
    }
    CHECK(budget > 20);
    CHECK(wilson_delta(16, 32, 1.96) == doctest::Approx(0.16369385683140608).epsilon(1e-12));
    CHECK(wilson_delta(16, 32) > EstimatorConfig{}.eps_node);
  }

  TEST_CASE("k_max = k_init takes exactly one batch") {
    EstimatorConfig cfg;
    cfg.k_max = cfg.k_init;
    const auto source = fixed_source(rollout::default_sim_spec(0.5));
    const auto est = estimate_node({}, problem(), *source, cfg, 5);
    CHECK(est.n_total == cfg.k_init);
    CHECK(est.iterations == 0);
    CHECK(est.termination_reason == TerminationReason::budget);
  }

  TEST_CASE("eps_node = 1 terminates after the initial batch") {
    EstimatorConfig cfg;
    cfg.eps_node = 1.0;
    const auto source = fixed_source(rollout::default_sim_spec(0.3));
    const auto est = estimate_node({}, problem(), *source, cfg, 5);
    CHECK(est.n_total == cfg.k_init);
    CHECK(est.termination_reason == TerminationReason::confidence);
  }

  TEST_CASE("estimate invariants over random nodes") {
    EstimatorConfig cfg;
    Rng rng(7);
    for (int i = 0; i < 200; ++i) {
      const double p = uniform01(rng);
      const auto source = fixed_source(rollout::default_sim_spec(p));
      const auto est = estimate_node({}, problem(), *source, cfg, static_cast<std::uint64_t>(i));
      int n = 0;
      double mu = 0.0;
      for (const auto& c : est.per_cluster) n += c.n;
      for (const auto& c : est.per_cluster) mu += static_cast<double>(c.n) / n * c.p_hat;
      CHECK(n == est.n_total);
      CHECK(est.mu_hat == doctest::Approx(mu).epsilon(1e-12));
      CHECK(est.mu_hat >= 0.0);
      CHECK(est.mu_hat <= 1.0);
      CHECK(est.n_total <= cfg.k_max + cfg.m_max);
      CHECK(est.iterations <= (cfg.k_max - cfg.k_init + cfg.m_min - 1) / cfg.m_min + 1);
    }
  }

  TEST_CASE("single effective cluster reproduces the fixed-budget estimate bit for bit") {
    for (double p : {0.1, 0.37, 0.5, 0.83}) {
      const auto source = fixed_source(degenerate_spec(p));
      for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto est = estimate_node({}, problem(), *source, EstimatorConfig{}, seed);
        REQUIRE(est.per_cluster.size() == 1);
        const double fixed = fixed_budget_estimate({}, problem(), *source, est.n_total, seed);
        CHECK(est.mu_hat == fixed);
      }
    }
  }

  TEST_CASE("fixed_budget_estimate") {
    CHECK(fixed_budget_estimate({}, problem(), *fixed_source(degenerate_spec(1.0)), 16, 3) == 1.0);
    CHECK(fixed_budget_estimate({}, problem(), *fixed_source(degenerate_spec(0.0)), 16, 3) == 0.0);
    const double v = fixed_budget_estimate({}, problem(), *fixed_source(rollout::default_sim_spec(0.7)), 16, 11);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(v * 16 == std::round(v * 16));
    CHECK_THROWS_AS(fixed_budget_estimate({}, problem(), *fixed_source(degenerate_spec(0.5)), 0, 1), Error);
  }

  TEST_CASE("termination reason names round-trip") {
    for (auto r : {TerminationReason::confidence, TerminationReason::budget,
                   TerminationReason::cluster_convergence}) {
      CHECK(termination_reason_from_string(to_string(r)) == r);
    }
    CHECK_FALSE(termination_reason_from_string("nope").has_value());
  }
}

#include "amcs/search.hpp"

#include <algorithm>
#include <cmath>

#include "amcs/answer.hpp"
#include "amcs/error.hpp"
#include "amcs/random.hpp"
#include "amcs/text.hpp"

namespace amcs::search {

void SearchConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& what) {
    throw Error(ErrorCode::invalid_config, "search." + key + ": " + what);
  };
  if (!(alpha > 0.0 && alpha < 1.0)) fail("alpha", "must lie strictly inside (0,1)");
  if (!(beta > 0.0 && beta < 1.0)) fail("beta", "must lie strictly inside (0,1)");
  if (!(c_puct > 0.0) || !std::isfinite(c_puct)) fail("c_puct", "must be a positive real");
  if (!(temperature_T > 0.0) || !std::isfinite(temperature_T)) {
    fail("temperature_T", "must be a positive real");
  }
  if (max_iterations < 1) fail("max_iterations", "must be >= 1");
  if (max_depth < 1) fail("max_depth", "must be >= 1");
  if (branching < 1) fail("branching", "must be >= 1");
}

int SearchNode::parent_visits() const {
  int n = 0;
  for (const auto& c : children) n += c.visit_count;
  return n;
}

std::size_t SearchNode::subtree_size() const {
  std::size_t n = 1;
  for (const auto& c : children) n += c.subtree_size();
  return n;
}

double q_value(double mu_hat, int len_r, int statement_length, const SearchConfig& cfg) {
  if (statement_length < 1) {
    throw Error(ErrorCode::invalid_problem, "problem statement length must be >= 1");
  }
  if (!(mu_hat >= 0.0 && mu_hat <= 1.0)) {
    throw Error(ErrorCode::validation, "mu_hat must lie in [0,1]");
  }
  if (len_r < 0) throw Error(ErrorCode::validation, "continuation length must be >= 0");
  return std::pow(cfg.alpha, 1.0 - mu_hat) *
         std::pow(cfg.beta, static_cast<double>(len_r) / statement_length);
}

double u_value(int parent_visits, int child_visits, double c_puct) {
  if (parent_visits < 1) {
    throw Error(ErrorCode::invalid_state, "exploration bonus needs at least one parent visit");
  }
  if (child_visits < 0) throw Error(ErrorCode::invalid_state, "negative child visit count");
  return c_puct * std::sqrt(std::log(static_cast<double>(parent_visits)) / (1.0 + child_visits));
}

double expansion_score(double q, double u, int t, double temperature_T) {
  if (!(temperature_T > 0.0)) throw Error(ErrorCode::invalid_config, "T must be positive");
  if (t < 0) throw Error(ErrorCode::invalid_state, "iteration counter must be >= 0");
  const double w = std::exp(-static_cast<double>(t) / temperature_T);
  return (1.0 - w) * q + w * u;
}

std::optional<ScoreComponents> select_child(SearchNode& node, int t, const SearchConfig& cfg) {
  const int parent = node.parent_visits() + 1;
  const double w = std::exp(-static_cast<double>(t) / cfg.temperature_T);
  std::optional<ScoreComponents> best;
  std::optional<std::size_t> greedy;
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    const auto& child = node.children[i];
    if (!child.estimate) continue;
    if (!greedy || child.q > node.children[*greedy].q) greedy = i;
    const double u = u_value(parent, child.visit_count, cfg.c_puct);
    const double score = expansion_score(child.q, u, t, cfg.temperature_T);
    if (!best || score > best->score) best = ScoreComponents{i, child.q, u, w, score, true};
  }
  if (!best) return std::nullopt;
  best->greedy = best->child == *greedy;
  ++node.children[best->child].visit_count;
  return best;
}

std::vector<std::string> segment_steps(const std::string& continuation,
                                       const std::string& delimiter) {
  return text::split_steps(continuation, delimiter);
}

std::size_t expand(SearchNode& node, const rollout::Problem& problem,
                   const rollout::RolloutSource& source, const SearchConfig& cfg,
                   const estimation::EstimatorConfig& estimator_cfg, std::uint64_t seed) {
  if (node.depth >= cfg.max_depth) {
    node.terminal = true;
    return 0;
  }
  auto continuations =
      source.generate(node.prefix_steps, problem, cfg.branching, derive_seed(seed, "expand"));

  std::vector<std::string> firsts;
  std::vector<std::vector<rollout::RolloutRecord>> reuse;
  for (auto& r : continuations) {
    if (r.steps.empty()) continue;
    const std::string first(text::trim(r.steps.front()));
    if (first.empty()) continue;
    auto it = std::find(firsts.begin(), firsts.end(), first);
    const auto idx = static_cast<std::size_t>(it - firsts.begin());
    if (it == firsts.end()) {
      firsts.push_back(first);
      reuse.emplace_back();
    }
    if (r.steps.size() > 1) {
      rollout::RolloutRecord rest = r;
      rest.steps.erase(rest.steps.begin());
      rest.token_count = std::max(1, r.token_count - text::count_tokens(first));
      rest.std_features.reset();
      reuse[idx].push_back(std::move(rest));
    }
  }
  if (firsts.empty()) {
    node.terminal = true;
    return 0;
  }

  std::vector<SearchNode> children;
  for (std::size_t i = 0; i < firsts.size(); ++i) {
    SearchNode child;
    child.prefix_steps = node.prefix_steps;
    child.prefix_steps.push_back(firsts[i]);
    child.depth = node.depth + 1;
    child.continuation_length = text::count_tokens(firsts[i]);
    child.estimate_seed = derive_seed(seed, firsts[i]);
    child.estimate = estimation::estimate_node(child.prefix_steps, problem, source, estimator_cfg,
                                               child.estimate_seed, std::move(reuse[i]));
    child.q = q_value(child.estimate->mu_hat, child.continuation_length,
                      problem.statement_length, cfg);
    child.terminal = child.depth >= cfg.max_depth || answer::has_final_answer(firsts[i]);
    children.push_back(std::move(child));
  }
  node.children = std::move(children);
  return node.children.size();
}

namespace {

dataset::SupervisionRecord make_record(const rollout::Problem& problem, const SearchNode& node,
                                       const std::string& tag) {
  dataset::SupervisionRecord r;
  r.problem_id = problem.id;
  r.problem_text = problem.statement;
  r.prefix_steps = node.prefix_steps;
  r.step_index = static_cast<int>(node.prefix_steps.size());
  r.mu_hat = node.estimate->mu_hat;
  r.n_total = node.estimate->n_total;
  r.termination_reason = node.estimate->termination_reason;
  r.per_cluster = node.estimate->per_cluster;
  r.search_depth = node.depth;
  r.generator_tag = tag;
  r.seed = node.estimate_seed;
  return r;
}

std::uint64_t node_seed(std::uint64_t seed, const std::vector<std::string>& prefix) {
  std::uint64_t h = derive_seed(seed, "node");
  for (const auto& step : prefix) h = derive_seed(h, step);
  return h;
}

}  // namespace

SearchResult run_search(const rollout::Problem& problem, const rollout::RolloutSource& source,
                        const SearchConfig& cfg, const estimation::EstimatorConfig& estimator_cfg,
                        std::uint64_t seed, const std::string& generator_tag) {
  cfg.validate();
  estimator_cfg.validate();
  SearchResult result;
  try {
    for (int t = 0; t < cfg.max_iterations; ++t) {
      SearchNode* node = &result.root;
      TraceEntry entry;
      entry.t = t;
      while (!node->children.empty()) {
        auto chosen = select_child(*node, t, cfg);
        if (!chosen) break;
        entry.path.push_back(chosen->child);
        entry.selections.push_back(*chosen);
        node = &node->children[chosen->child];
      }
      if (!node->terminal && node->children.empty()) {
        expand(*node, problem, source, cfg, estimator_cfg, node_seed(seed, node->prefix_steps));
        for (const auto& child : node->children) {
          result.records.push_back(make_record(problem, child, generator_tag));
        }
      }
      result.trace.entries.push_back(std::move(entry));
      if (result.root.terminal) break;
    }
  } catch (const Error& e) {
    result.error = e.what();
  }
  return result;
}

std::optional<double> exploration_fraction(const SearchTrace& trace, int begin, int end) {
  int total = 0;
  int explore = 0;
  for (const auto& entry : trace.entries) {
    if (entry.t < begin || entry.t >= end) continue;
    for (const auto& s : entry.selections) {
      ++total;
      explore += s.greedy ? 0 : 1;
    }
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(explore) / total;
}

}  // namespace amcs::search

#include "amcs/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "amcs/random.hpp"
#include "amcs/text.hpp"

namespace amcs::rollout {

namespace {

constexpr double kWeightTolerance = 1e-9;
constexpr long long kMaxSimTokens = 1'000'000;

constexpr std::array<std::string_view, 6> kFiller = {
    "So we rewrite the left side and collect the terms with the same power.",
    "Substituting the previous result gives a simpler relation between the unknowns.",
    "Hence both sides can be divided by the common factor we found above.",
    "Checking this value against the original condition shows it is still consistent.",
    "Next we simplify the expression and keep track of every sign carefully.",
    "Then the remaining quantity follows directly from the relation in step two.",
};

constexpr std::array<std::string_view, 10> kMethods = {
    "factor the expression",        "substitute the known values",
    "apply the quadratic formula",  "work backwards from the target",
    "set up an equation",           "draw an auxiliary line",
    "use modular arithmetic",       "expand the product",
    "consider the complementary case", "bound the quantity from above",
};

constexpr std::array<std::string_view, 12> kClauseWords = {
    "carefully", "first", "so", "that", "the", "relation", "becomes",
    "clear",     "and",   "we", "track", "signs",
};

std::size_t pick(const std::vector<MixtureComponent>& mixture, double u) {
  double acc = 0.0;
  for (std::size_t k = 0; k < mixture.size(); ++k) {
    acc += mixture[k].weight;
    if (u < acc) return k;
  }
  return mixture.size() - 1;
}

double draw(const MixtureComponent& c, Rng& rng) {
  if (c.stddev <= 0.0) return c.mean;
  std::normal_distribution<double> dist(c.mean, c.stddev);
  return dist(rng);
}

// First `n` words of a filler sentence.
std::string filler_prefix(std::string_view sentence, int n) {
  std::size_t pos = 0;
  int seen = 0;
  while (pos < sentence.size()) {
    auto next = sentence.find(' ', pos);
    ++seen;
    if (seen == n || next == std::string_view::npos) {
      return std::string(sentence.substr(0, next == std::string_view::npos ? sentence.size() : next));
    }
    pos = next + 1;
  }
  return std::string(sentence);
}

void check_mixture(const std::vector<MixtureComponent>& mixture, const char* name) {
  if (mixture.empty()) {
    throw Error(ErrorCode::invalid_config, std::string(name) + " must have at least one component");
  }
  double total = 0.0;
  for (const auto& c : mixture) {
    if (!(c.weight > 0.0)) {
      throw Error(ErrorCode::invalid_config, std::string(name) + " weights must be positive");
    }
    if (!(c.stddev >= 0.0) || !std::isfinite(c.mean)) {
      throw Error(ErrorCode::invalid_config,
                  std::string(name) + " components need finite mean and stddev >= 0");
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > kWeightTolerance) {
    throw Error(ErrorCode::invalid_config, std::string(name) + " weights must sum to 1");
  }
}

}  // namespace

Problem make_problem(std::string id, std::string statement, std::string gold_answer) {
  if (id.empty()) throw Error(ErrorCode::invalid_problem, "problem id must be non-empty");
  const int length = text::count_tokens(statement);
  if (length < 1) {
    throw Error(ErrorCode::invalid_problem, "problem '" + id + "' has an empty statement");
  }
  if (text::trim(gold_answer).empty()) {
    throw Error(ErrorCode::invalid_problem, "problem '" + id + "' has an empty answer");
  }
  return Problem{std::move(id), std::move(statement), std::move(gold_answer), length};
}

std::vector<Problem> load_problems(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::input, "cannot open problems file: " + path);
  std::vector<Problem> problems;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t line_offset = offset;
    offset += line.size() + 1;
    if (text::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, line_offset, e.what());
    }
    try {
      auto id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
      auto problem = make_problem(id, j.at("problem").get<std::string>(),
                                  j.at("answer").is_string() ? j.at("answer").get<std::string>()
                                                             : j.at("answer").dump());
      if (!ids.insert(problem.id).second) {
        throw Error(ErrorCode::invalid_problem, "duplicate problem id '" + problem.id + "'");
      }
      problems.push_back(std::move(problem));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, line_offset, e.what());
    } catch (const Error& e) {
      throw ParseError(line_no, line_offset, e.what());
    }
  }
  return problems;
}

const char* to_string(SourceTag tag) {
  return tag == SourceTag::simulated ? "simulated" : "remote";
}

Feature extract_features(RolloutRecord& rollout) {
  if (rollout.token_count < 1) {
    throw Error(ErrorCode::invalid_rollout, "rollout token_count must be >= 1");
  }
  if (!(rollout.mean_nll >= 0.0) || !std::isfinite(rollout.mean_nll)) {
    throw Error(ErrorCode::invalid_rollout, "rollout mean_nll must be finite and >= 0");
  }
  rollout.raw_features = {rollout.mean_nll,
                          std::log(static_cast<double>(rollout.token_count) + kLengthGuard)};
  return rollout.raw_features;
}

FeatureStats<2> fit_feature_stats(std::span<const RolloutRecord> rollouts) {
  std::vector<Feature> points;
  points.reserve(rollouts.size());
  for (const auto& r : rollouts) points.push_back(r.raw_features);
  return fit_feature_stats<2>(points);
}

// ---------------------------------------------------------------------------

void SimNodeSpec::validate() const {
  if (!(true_success_prob >= 0.0 && true_success_prob <= 1.0)) {
    throw Error(ErrorCode::invalid_config, "true_success_prob must lie in [0,1]");
  }
  check_mixture(nll_mixture, "nll_mixture");
  check_mixture(length_mixture, "length_mixture");
  if (!strategy_success.empty() || !strategy_steps.empty()) {
    if (!joint()) {
      throw Error(ErrorCode::invalid_config,
                  "per-strategy fields need nll and length mixtures of equal size");
    }
  }
  if (!strategy_success.empty()) {
    if (strategy_success.size() != nll_mixture.size()) {
      throw Error(ErrorCode::invalid_config, "strategy_success size must match the mixtures");
    }
    double mean = 0.0;
    for (std::size_t k = 0; k < strategy_success.size(); ++k) {
      if (!(strategy_success[k] >= 0.0 && strategy_success[k] <= 1.0)) {
        throw Error(ErrorCode::invalid_config, "strategy_success entries must lie in [0,1]");
      }
      mean += nll_mixture[k].weight * strategy_success[k];
    }
    if (std::abs(mean - true_success_prob) > kWeightTolerance) {
      throw Error(ErrorCode::invalid_config,
                  "strategy_success weighted mean must equal true_success_prob");
    }
  }
  if (!strategy_steps.empty() && strategy_steps.size() != nll_mixture.size()) {
    throw Error(ErrorCode::invalid_config, "strategy_steps size must match the mixtures");
  }
}

SimNodeSpec default_sim_spec(double true_success_prob) {
  SimNodeSpec spec;
  spec.true_success_prob = true_success_prob;
  spec.nll_mixture = {{0.40, 0.35, 0.08}, {0.35, 0.90, 0.10}, {0.25, 1.60, 0.12}};
  spec.length_mixture = {
      {0.40, std::log(60.0), 0.15}, {0.35, std::log(150.0), 0.15}, {0.25, std::log(320.0), 0.15}};
  return spec;
}

std::vector<RolloutRecord> sim_generate(const SimNodeSpec& spec,
                                        std::span<const std::string> prefix,
                                        const Problem& problem, int count, std::uint64_t seed,
                                        std::uint64_t first_index) {
  spec.validate();
  std::vector<RolloutRecord> out;
  if (count <= 0) return out;
  out.reserve(static_cast<std::size_t>(count));
  const std::string wrong_answer = problem.gold_answer + "1";
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, first_index + static_cast<std::uint64_t>(i)));
    const std::size_t k = pick(spec.nll_mixture, uniform01(rng));
    const double nll = std::max(0.0, draw(spec.nll_mixture[k], rng));
    const std::size_t kl = spec.joint() ? k : pick(spec.length_mixture, uniform01(rng));
    const double log_len = draw(spec.length_mixture[kl], rng);
    const long long target =
        std::clamp(std::llround(std::exp(std::min(log_len, 20.0))), 1LL, kMaxSimTokens);
    const double p = spec.strategy_success.empty() ? spec.true_success_prob
                                                   : spec.strategy_success[k];
    const bool success = uniform01(rng) < p;

    RolloutRecord r;
    r.source_tag = SourceTag::simulated;
    r.success = success;
    r.mean_nll = nll;
    if (!spec.strategy_steps.empty()) {
      r.steps.push_back(spec.strategy_steps[k]);
    } else {
      r.steps.push_back("Step " + std::to_string(prefix.size() + 1) + ": " +
                        std::string(kMethods[rng() % kMethods.size()]) + ".");
    }
    std::string answer_step =
        "The answer is " + (success ? problem.gold_answer : wrong_answer) + ".";
    long long used = text::count_tokens(r.steps.front()) + text::count_tokens(answer_step);
    while (used < target) {
      const auto& sentence = kFiller[rng() % kFiller.size()];
      const int full = text::count_tokens(sentence);
      const int n = static_cast<int>(std::min<long long>(full, target - used));
      r.steps.push_back(n == full ? std::string(sentence) : filler_prefix(sentence, n));
      used += n;
    }
    r.steps.push_back(std::move(answer_step));
    r.token_count = static_cast<int>(used);
    extract_features(r);
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------

FixedSpecWorld::FixedSpecWorld(SimNodeSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

void SimWorldConfig::validate() const {
  if (strategies < 1 || strategies > static_cast<int>(kMethods.size())) {
    throw Error(ErrorCode::invalid_config,
                "sim.strategies must lie in [1," + std::to_string(kMethods.size()) + "]");
  }
  if (!(spread >= 0.0 && spread <= 1.0)) {
    throw Error(ErrorCode::invalid_config, "sim.spread must lie in [0,1]");
  }
  if (root_p && !(*root_p >= 0.0 && *root_p <= 1.0)) {
    throw Error(ErrorCode::invalid_config, "sim.root_p must lie in [0,1]");
  }
  if (root_strategy_success.size() > kMethods.size()) {
    throw Error(ErrorCode::invalid_config, "too many root strategies");
  }
  for (double p : root_strategy_success) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(ErrorCode::invalid_config, "root strategy success must lie in [0,1]");
    }
  }
}

HashedSimWorld::HashedSimWorld(SimWorldConfig config) : config_(std::move(config)) {
  config_.validate();
}

SimNodeSpec HashedSimWorld::spec_at(std::uint64_t path_hash,
                                    std::size_t depth, double value) const {
  Rng rng(path_hash);
  const bool root_override = depth == 0 && !config_.root_strategy_success.empty();
  const std::size_t n = root_override ? config_.root_strategy_success.size()
                                      : static_cast<std::size_t>(config_.strategies);

  std::vector<double> weights(n);
  for (auto& w : weights) w = root_override ? 1.0 : 0.5 + uniform01(rng);
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  for (auto& w : weights) w /= total;

  SimNodeSpec spec;
  std::array<std::size_t, kMethods.size()> order{};
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t k = 0; k < n; ++k) {
    std::swap(order[k], order[k + rng() % (order.size() - k)]);
    const double nll_mean = 0.2 + 1.4 * uniform01(rng);
    const double len_mean = std::log(30.0) + (std::log(300.0) - std::log(30.0)) * uniform01(rng);
    spec.nll_mixture.push_back({weights[k], nll_mean, 0.08});
    spec.length_mixture.push_back({weights[k], len_mean, 0.15});

    std::string step = "Step " + std::to_string(depth + 1) + ": " +
                       std::string(kMethods[order[k]]);
    const int clause = 3 + static_cast<int>(rng() % 14);
    for (int w = 0; w < clause; ++w) {
      step += ' ';
      step += kClauseWords[rng() % kClauseWords.size()];
    }
    spec.strategy_steps.push_back(step + ".");
  }

  if (root_override) {
    spec.strategy_success = config_.root_strategy_success;
    spec.true_success_prob = std::accumulate(spec.strategy_success.begin(),
                                             spec.strategy_success.end(), 0.0) /
                             static_cast<double>(n);
  } else {
    std::vector<double> offsets(n);
    double mean_offset = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      offsets[k] = 2.0 * uniform01(rng) - 1.0;
      mean_offset += weights[k] * offsets[k];
    }
    double scale = config_.spread;
    for (std::size_t k = 0; k < n; ++k) {
      const double e = offsets[k] - mean_offset;
      if (e > 0.0) scale = std::min(scale, (1.0 - value) / e);
      if (e < 0.0) scale = std::min(scale, value / -e);
    }
    for (std::size_t k = 0; k < n; ++k) {
      spec.strategy_success.push_back(
          std::clamp(value + scale * (offsets[k] - mean_offset), 0.0, 1.0));
    }
    spec.true_success_prob = value;
  }
  return spec;
}

SimNodeSpec HashedSimWorld::node_spec(const Problem& problem,
                                      std::span<const std::string> prefix) const {
  std::uint64_t h = derive_seed(config_.seed, problem.id);
  double value;
  if (!config_.root_strategy_success.empty()) {
    value = 0.0;
  } else if (config_.root_p) {
    value = *config_.root_p;
  } else {
    Rng rng(derive_seed(h, "root"));
    value = 0.05 + 0.9 * uniform01(rng);
  }
  for (std::size_t d = 0; d < prefix.size(); ++d) {
    const auto spec = spec_at(h, d, value);
    value = spec.true_success_prob;
    auto it = std::find(spec.strategy_steps.begin(), spec.strategy_steps.end(), prefix[d]);
    if (it != spec.strategy_steps.end()) {
      value = spec.strategy_success[static_cast<std::size_t>(it - spec.strategy_steps.begin())];
    }
    h = derive_seed(h, prefix[d]);
  }
  auto spec = spec_at(h, prefix.size(), value);
  double mean = 0.0;
  for (std::size_t k = 0; k < spec.strategy_success.size(); ++k) {
    mean += spec.nll_mixture[k].weight * spec.strategy_success[k];
  }
  spec.true_success_prob = std::clamp(mean, 0.0, 1.0);
  return spec;
}

SimulatedSource::SimulatedSource(std::shared_ptr<const SimWorld> world)
    : world_(std::move(world)) {
  if (!world_) throw Error(ErrorCode::invalid_config, "simulated source needs a world");
}

std::vector<RolloutRecord> SimulatedSource::generate(std::span<const std::string> prefix,
                                                     const Problem& problem, int count,
                                                     std::uint64_t seed,
                                                     std::uint64_t first_index) const {
  return sim_generate(world_->node_spec(problem, prefix), prefix, problem, count, seed,
                      first_index);
}

}  // namespace amcs::rollout

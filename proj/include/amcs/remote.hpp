#pragma once

/**
 * Rollout source backed by an OpenAI-compatible chat completions endpoint.
 *
 * Every rollout index is one request (n = 1) carrying its own derived seed,
 * so a node's stream keeps the same shape as the simulated source. Requests
 * run concurrently up to `max_parallel` and results are returned in index
 * order.
 *
 *   RemoteConfig cfg = RemoteConfig::from_env();
 *   cfg.model = "my-model";
 *   RemoteSource source(cfg);
 *   auto rollouts = source.generate(prefix, problem, 8, seed);
 */

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "amcs/rollout.hpp"

namespace amcs::remote {

struct RemoteConfig {
  std::string base_url;  // AMCS_BASE_URL, e.g. http://localhost:8000
  std::string api_key;   // AMCS_API_KEY
  std::string model;
  double temperature = 0.7;
  int max_tokens = 1024;
  int max_parallel = 4;
  int max_retries = 3;
  int backoff_ms = 250;  // doubled after every failed attempt
  int timeout_s = 120;
  std::string step_delimiter = "\n\n";

  /// Defaults with base_url and api_key taken from the environment.
  static RemoteConfig from_env();

  /// Throws invalid_config naming the offending `remote.*` key.
  void validate() const;
};

/// Parsed body of one chat completion choice.
struct Completion {
  std::string content;
  std::optional<double> mean_nll;       // absent when no log-probabilities came back
  std::optional<int> completion_tokens;  // provider-reported count
};

/// Parses a chat completions response body. Throws transport on malformed bodies.
Completion parse_completion(const std::string& body);

/// Builds the JSON request body for one rollout.
std::string build_request(const RemoteConfig& cfg, std::span<const std::string> prefix,
                          const rollout::Problem& problem, std::uint64_t seed);

/// Turns a completion into a rollout record (segmentation, answer check, features).
rollout::RolloutRecord to_record(const Completion& completion, const rollout::Problem& problem,
                                 const std::string& step_delimiter);

class RemoteSource : public rollout::RolloutSource {
public:
  explicit RemoteSource(RemoteConfig config);

  std::vector<rollout::RolloutRecord> generate(std::span<const std::string> prefix,
                                               const rollout::Problem& problem, int count,
                                               std::uint64_t seed,
                                               std::uint64_t first_index = 0) const override;

  const RemoteConfig& config() const { return config_; }

private:
  rollout::RolloutRecord request_one(std::span<const std::string> prefix,
                                     const rollout::Problem& problem, std::uint64_t seed) const;

  RemoteConfig config_;
  std::string origin_;     // scheme://host[:port]
  std::string path_base_;  // path prefix from base_url, no trailing slash
};

}  // namespace amcs::remote

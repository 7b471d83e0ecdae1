#include "amcs/remote.hpp"

#include <chrono>
#include <cstdlib>
#include <future>
#include <thread>

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "amcs/answer.hpp"
#include "amcs/error.hpp"
#include "amcs/random.hpp"
#include "amcs/text.hpp"

namespace amcs::remote {

using nlohmann::json;

RemoteConfig RemoteConfig::from_env() {
  RemoteConfig cfg;
  if (const char* url = std::getenv("AMCS_BASE_URL")) cfg.base_url = url;
  if (const char* key = std::getenv("AMCS_API_KEY")) cfg.api_key = key;
  return cfg;
}

void RemoteConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& what) {
    throw Error(ErrorCode::invalid_config, "remote." + key + ": " + what);
  };
  if (base_url.empty()) fail("base_url", "not set (AMCS_BASE_URL)");
  if (base_url.rfind("http://", 0) != 0 && base_url.rfind("https://", 0) != 0) {
    fail("base_url", "must start with http:// or https://");
  }
  if (api_key.empty()) fail("api_key", "not set (AMCS_API_KEY)");
  if (model.empty()) fail("model", "must be non-empty");
  if (!(temperature > 0.0)) fail("temperature", "must be > 0 (sampling is non-greedy)");
  if (max_tokens < 1) fail("max_tokens", "must be >= 1");
  if (max_parallel < 1) fail("max_parallel", "must be >= 1");
  if (max_retries < 0) fail("max_retries", "must be >= 0");
  if (backoff_ms < 0) fail("backoff_ms", "must be >= 0");
  if (timeout_s < 1) fail("timeout_s", "must be >= 1");
}

Completion parse_completion(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::transport, std::string("malformed completion body: ") + e.what());
  }
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
    throw Error(ErrorCode::transport, "completion body has no choices");
  }
  const auto& choice = j["choices"][0];
  Completion c;
  if (choice.contains("message") && choice["message"].contains("content") &&
      choice["message"]["content"].is_string()) {
    c.content = choice["message"]["content"].get<std::string>();
  } else if (choice.contains("text") && choice["text"].is_string()) {
    c.content = choice["text"].get<std::string>();
  }

  std::vector<double> logprobs;
  if (choice.contains("logprobs") && choice["logprobs"].is_object()) {
    const auto& lp = choice["logprobs"];
    if (lp.contains("content") && lp["content"].is_array()) {
      for (const auto& tok : lp["content"]) {
        if (tok.contains("logprob") && tok["logprob"].is_number()) {
          logprobs.push_back(tok["logprob"].get<double>());
        }
      }
    } else if (lp.contains("token_logprobs") && lp["token_logprobs"].is_array()) {
      for (const auto& v : lp["token_logprobs"]) {
        if (v.is_number()) logprobs.push_back(v.get<double>());
      }
    }
  }
  if (!logprobs.empty()) {
    double sum = 0.0;
    for (double v : logprobs) sum -= v;
    c.mean_nll = std::max(0.0, sum / static_cast<double>(logprobs.size()));
  }
  if (j.contains("usage") && j["usage"].contains("completion_tokens") &&
      j["usage"]["completion_tokens"].is_number_integer()) {
    c.completion_tokens = j["usage"]["completion_tokens"].get<int>();
  }
  return c;
}

std::string build_request(const RemoteConfig& cfg, std::span<const std::string> prefix,
                          const rollout::Problem& problem, std::uint64_t seed) {
  std::string user = "Solve the following problem step by step. Separate steps with a blank "
                     "line and finish with \"The answer is X.\"\n\n" +
                     problem.statement;
  json messages = json::array();
  messages.push_back({{"role", "user"}, {"content", std::move(user)}});
  if (!prefix.empty()) {
    std::vector<std::string> steps(prefix.begin(), prefix.end());
    messages.push_back({{"role", "assistant"}, {"content", text::join(steps, cfg.step_delimiter)}});
    messages.push_back({{"role", "user"}, {"content", "Continue from the last step."}});
  }
  json body = {{"model", cfg.model},
               {"messages", std::move(messages)},
               {"n", 1},
               {"temperature", cfg.temperature},
               {"max_tokens", cfg.max_tokens},
               {"logprobs", true},
               {"seed", seed & ((1ULL << 53) - 1)}};
  return body.dump();
}

rollout::RolloutRecord to_record(const Completion& completion, const rollout::Problem& problem,
                                 const std::string& step_delimiter) {
  rollout::RolloutRecord r;
  r.source_tag = rollout::SourceTag::remote;
  r.steps = text::split_steps(completion.content, step_delimiter);
  if (r.steps.empty()) r.steps.emplace_back();
  const int counted = completion.completion_tokens.value_or(text::count_tokens(completion.content));
  r.token_count = std::max(1, counted);
  if (completion.mean_nll) {
    r.mean_nll = *completion.mean_nll;
  } else {
    r.mean_nll = 0.0;
    r.nll_fallback = true;
  }
  r.success = answer::check_answer(completion.content, problem.gold_answer);
  rollout::extract_features(r);
  return r;
}

RemoteSource::RemoteSource(RemoteConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto scheme_end = config_.base_url.find("://") + 3;
  const auto path_start = config_.base_url.find('/', scheme_end);
  if (path_start == std::string::npos) {
    origin_ = config_.base_url;
  } else {
    origin_ = config_.base_url.substr(0, path_start);
    path_base_ = config_.base_url.substr(path_start);
  }
  while (!path_base_.empty() && path_base_.back() == '/') path_base_.pop_back();
}

rollout::RolloutRecord RemoteSource::request_one(std::span<const std::string> prefix,
                                                 const rollout::Problem& problem,
                                                 std::uint64_t seed) const {
  const std::string body = build_request(config_, prefix, problem, seed);
  const std::string path = path_base_ + "/v1/chat/completions";
  httplib::Client client(origin_);
  client.set_connection_timeout(config_.timeout_s, 0);
  client.set_read_timeout(config_.timeout_s, 0);
  client.set_bearer_token_auth(config_.api_key);

  std::string last_error;
  int attempts = 0;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      const auto wait = std::chrono::milliseconds(static_cast<long long>(config_.backoff_ms)
                                                  << (attempt - 1));
      std::this_thread::sleep_for(wait);
    }
    ++attempts;
    auto res = client.Post(path, body, "application/json");
    if (!res) {
      last_error = "connection failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) {
      const auto completion = parse_completion(res->body);
      if (!completion.mean_nll) {
        spdlog::warn("remote: no log-probabilities returned; mean_nll falls back to 0.0");
      }
      return to_record(completion, problem, config_.step_delimiter);
    }
    last_error = "HTTP " + std::to_string(res->status);
    const bool transient = res->status == 429 || res->status >= 500;
    if (!transient) break;
  }
  throw Error(ErrorCode::transport, "POST " + origin_ + path + " failed after " +
                                        std::to_string(attempts) + " attempt(s): " + last_error);
}

std::vector<rollout::RolloutRecord> RemoteSource::generate(std::span<const std::string> prefix,
                                                           const rollout::Problem& problem,
                                                           int count, std::uint64_t seed,
                                                           std::uint64_t first_index) const {
  std::vector<rollout::RolloutRecord> out;
  if (count <= 0) return out;
  out.resize(static_cast<std::size_t>(count));
  const int width = config_.max_parallel;
  for (int start = 0; start < count; start += width) {
    const int stop = std::min(count, start + width);
    std::vector<std::future<rollout::RolloutRecord>> pending;
    for (int i = start; i < stop; ++i) {
      const auto s = derive_seed(seed, first_index + static_cast<std::uint64_t>(i));
      pending.push_back(std::async(std::launch::async,
                                   [this, prefix, &problem, s] { return request_one(prefix, problem, s); }));
    }
    std::exception_ptr failure;
    for (int i = start; i < stop; ++i) {
      try {
        out[static_cast<std::size_t>(i)] = pending[static_cast<std::size_t>(i - start)].get();
      } catch (...) {
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  }
  return out;
}

}  // namespace amcs::remote

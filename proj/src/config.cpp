#include "amcs/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "amcs/error.hpp"
#include "amcs/random.hpp"
#include "amcs/text.hpp"

namespace amcs::config {

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw Error(ErrorCode::invalid_config,
              fmt::format("{}: expected {}, got '{}'", key, want, value));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value, const char* want) {
  const auto v = text::trim(value);
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, value, want);
  return out;
}

int to_int(const std::string& key, const std::string& v) { return parse_number<int>(key, v, "an integer"); }
std::uint64_t to_u64(const std::string& key, const std::string& v) {
  return parse_number<std::uint64_t>(key, v, "a non-negative integer");
}
double to_double(const std::string& key, const std::string& v) {
  return parse_number<double>(key, v, "a real number");
}

bool to_bool(const std::string& key, const std::string& value) {
  const auto v = text::trim(value);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, value, "a boolean");
}

std::vector<double> to_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  if (text::trim(value).empty()) return out;
  std::stringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(to_double(key, item));
  return out;
}

std::string unescape(const std::string& value) {
  std::string out;
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (value[i] == '\\' && i + 1 < value.size()) {
      const char c = value[i + 1];
      if (c == 'n' || c == 't' || c == '\\') {
        out += c == 'n' ? '\n' : c == 't' ? '\t' : '\\';
        ++i;
        continue;
      }
    }
    out += value[i];
  }
  return out;
}

std::string escape(const std::string& value) {
  std::string out;
  for (char c : value) {
    if (c == '\n') {
      out += "\\n";
    } else if (c == '\t') {
      out += "\\t";
    } else if (c == '\\') {
      out += "\\\\";
    } else {
      out += c;
    }
  }
  return out;
}

std::string fmt_list(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ',';
    out += fmt::format("{}", values[i]);
  }
  return out;
}

const std::set<std::string> kSections = {"run",    "estimator", "search", "harness",
                                          "remote", "trainer",   "sim"};

struct Field {
  std::function<void(const std::string& key, const std::string& value)> set;
  std::function<std::string()> get;
};

/// The `section.key` table shared by parsing and canonical output.
std::map<std::string, Field> fields(RunConfig* c) {
  std::map<std::string, Field> f;
  auto num = [](auto& ref) {
    return [p = &ref] { return fmt::format("{}", *p); };
  };
  auto str = [](std::string& ref) {
    return [p = &ref] { return escape(*p); };
  };

  f["run.seed"] = {[=](auto& k, auto& v) { c->run.seed = to_u64(k, v); }, num(c->run.seed)};
  f["run.out_dir"] = {[=](auto&, auto& v) { c->run.out_dir = v; }, str(c->run.out_dir)};
  f["run.log_level"] = {[=](auto&, auto& v) { c->run.log_level = v; }, str(c->run.log_level)};
  f["run.source"] = {[=](auto&, auto& v) { c->run.source = v; }, str(c->run.source)};
  f["run.max_parallel_problems"] = {
      [=](auto& k, auto& v) { c->run.max_parallel_problems = to_int(k, v); },
      num(c->run.max_parallel_problems)};
  f["run.generator_tag"] = {[=](auto&, auto& v) { c->run.generator_tag = v; },
                            str(c->run.generator_tag)};

  auto* e = &c->estimator;
  f["estimator.k_init"] = {[=](auto& k, auto& v) { e->k_init = to_int(k, v); }, num(e->k_init)};
  f["estimator.k_max"] = {[=](auto& k, auto& v) { e->k_max = to_int(k, v); }, num(e->k_max)};
  f["estimator.k_clusters"] = {[=](auto& k, auto& v) { e->k_clusters = to_int(k, v); },
                               num(e->k_clusters)};
  f["estimator.eps_node"] = {[=](auto& k, auto& v) { e->eps_node = to_double(k, v); },
                             num(e->eps_node)};
  f["estimator.eps_cluster"] = {[=](auto& k, auto& v) { e->eps_cluster = to_double(k, v); },
                                num(e->eps_cluster)};
  f["estimator.n_max_cluster"] = {[=](auto& k, auto& v) { e->n_max_cluster = to_int(k, v); },
                                  num(e->n_max_cluster)};
  f["estimator.gamma"] = {[=](auto& k, auto& v) { e->gamma = to_double(k, v); }, num(e->gamma)};
  f["estimator.m_min"] = {[=](auto& k, auto& v) { e->m_min = to_int(k, v); }, num(e->m_min)};
  f["estimator.m_max"] = {[=](auto& k, auto& v) { e->m_max = to_int(k, v); }, num(e->m_max)};
  f["estimator.z"] = {[=](auto& k, auto& v) { e->z = to_double(k, v); }, num(e->z)};

  auto* s = &c->search;
  f["search.alpha"] = {[=](auto& k, auto& v) { s->alpha = to_double(k, v); }, num(s->alpha)};
  f["search.beta"] = {[=](auto& k, auto& v) { s->beta = to_double(k, v); }, num(s->beta)};
  f["search.c_puct"] = {[=](auto& k, auto& v) { s->c_puct = to_double(k, v); }, num(s->c_puct)};
  f["search.temperature_T"] = {[=](auto& k, auto& v) { s->temperature_T = to_double(k, v); },
                               num(s->temperature_T)};
  f["search.max_iterations"] = {[=](auto& k, auto& v) { s->max_iterations = to_int(k, v); },
                                num(s->max_iterations)};
  f["search.max_depth"] = {[=](auto& k, auto& v) { s->max_depth = to_int(k, v); },
                           num(s->max_depth)};
  f["search.branching"] = {[=](auto& k, auto& v) { s->branching = to_int(k, v); },
                           num(s->branching)};
  f["search.step_delimiter"] = {[=](auto&, auto& v) { s->step_delimiter = unescape(v); },
                                str(s->step_delimiter)};

  auto* h = &c->harness;
  f["harness.node_count"] = {[=](auto& k, auto& v) { h->node_count = to_int(k, v); },
                             num(h->node_count)};
  f["harness.seeds"] = {[=](auto& k, auto& v) { h->seeds = to_int(k, v); }, num(h->seeds)};
  f["harness.fixed_n"] = {[=](auto& k, auto& v) { h->fixed_n = to_int(k, v); }, num(h->fixed_n)};
  f["harness.match_budget"] = {[=](auto& k, auto& v) { h->match_budget = to_bool(k, v); },
                               [=] { return std::string(h->match_budget ? "true" : "false"); }};
  f["harness.bucket_weights"] = {[=](auto& k, auto& v) { h->bucket_weights = to_list(k, v); },
                                 [=] { return fmt_list(h->bucket_weights); }};
  f["harness.p_values"] = {[=](auto& k, auto& v) { h->p_values = to_list(k, v); },
                           [=] { return fmt_list(h->p_values); }};

  auto* r = &c->remote;
  f["remote.base_url"] = {[=](auto&, auto& v) { r->base_url = v; }, str(r->base_url)};
  f["remote.model"] = {[=](auto&, auto& v) { r->model = v; }, str(r->model)};
  f["remote.temperature"] = {[=](auto& k, auto& v) { r->temperature = to_double(k, v); },
                             num(r->temperature)};
  f["remote.max_tokens"] = {[=](auto& k, auto& v) { r->max_tokens = to_int(k, v); },
                            num(r->max_tokens)};
  f["remote.max_parallel"] = {[=](auto& k, auto& v) { r->max_parallel = to_int(k, v); },
                              num(r->max_parallel)};
  f["remote.max_retries"] = {[=](auto& k, auto& v) { r->max_retries = to_int(k, v); },
                             num(r->max_retries)};
  f["remote.backoff_ms"] = {[=](auto& k, auto& v) { r->backoff_ms = to_int(k, v); },
                            num(r->backoff_ms)};
  f["remote.timeout_s"] = {[=](auto& k, auto& v) { r->timeout_s = to_int(k, v); },
                           num(r->timeout_s)};

  auto* t = &c->trainer;
  f["trainer.learning_rate"] = {[=](auto& k, auto& v) { t->learning_rate = to_double(k, v); },
                                num(t->learning_rate)};
  f["trainer.epochs"] = {[=](auto& k, auto& v) { t->epochs = to_int(k, v); }, num(t->epochs)};
  f["trainer.batch_size"] = {[=](auto& k, auto& v) { t->batch_size = to_int(k, v); },
                             num(t->batch_size)};
  f["trainer.seed"] = {[=](auto& k, auto& v) { t->seed = to_u64(k, v); }, num(t->seed)};

  auto* w = &c->sim;
  f["sim.seed"] = {[=](auto& k, auto& v) { c->sim_seed = to_u64(k, v); },
                   [=] { return c->sim_seed ? fmt::format("{}", *c->sim_seed) : std::string(); }};
  f["sim.strategies"] = {[=](auto& k, auto& v) { w->strategies = to_int(k, v); },
                         num(w->strategies)};
  f["sim.spread"] = {[=](auto& k, auto& v) { w->spread = to_double(k, v); }, num(w->spread)};
  f["sim.root_p"] = {[=](auto& k, auto& v) { w->root_p = to_double(k, v); },
                     [=] { return w->root_p ? fmt::format("{}", *w->root_p) : std::string(); }};
  f["sim.root_strategy_success"] = {
      [=](auto& k, auto& v) { w->root_strategy_success = to_list(k, v); },
      [=] { return fmt_list(w->root_strategy_success); }};
  return f;
}

}  // namespace

void RunConfig::validate() const {
  if (run.source != "sim" && run.source != "remote") {
    throw Error(ErrorCode::invalid_config, "run.source: expected 'sim' or 'remote'");
  }
  static const std::set<std::string> levels = {"trace", "debug", "info", "warn", "error", "off"};
  if (!levels.count(run.log_level)) {
    throw Error(ErrorCode::invalid_config, "run.log_level: unknown level '" + run.log_level + "'");
  }
  if (run.max_parallel_problems < 1) {
    throw Error(ErrorCode::invalid_config, "run.max_parallel_problems: must be >= 1");
  }
  if (run.generator_tag.empty()) {
    throw Error(ErrorCode::invalid_config, "run.generator_tag: must be non-empty");
  }
  estimator.validate();
  search.validate();
  trainer.validate();
  sim_world().validate();
  if (harness.seeds < 1) throw Error(ErrorCode::invalid_config, "harness.seeds: must be >= 1");
  if (harness.fixed_n < 1) throw Error(ErrorCode::invalid_config, "harness.fixed_n: must be >= 1");
  if (harness.bucket_weights.size() != dataset::kBuckets) {
    throw Error(ErrorCode::invalid_config, "harness.bucket_weights: expected 5 weights");
  }
  forest_spec().validate();
  if (run.source == "remote") remote.validate();
}

rollout::SimWorldConfig RunConfig::sim_world() const {
  auto w = sim;
  w.seed = sim_seed.value_or(run.seed);
  return w;
}

harness::ForestSpec RunConfig::forest_spec() const {
  harness::ForestSpec spec;
  spec.node_count = harness.node_count;
  if (harness.bucket_weights.size() == dataset::kBuckets) {
    std::copy(harness.bucket_weights.begin(), harness.bucket_weights.end(),
              spec.bucket_weights.begin());
  }
  spec.p_values = harness.p_values;
  spec.seed = run.seed;
  return spec;
}

std::vector<std::uint64_t> RunConfig::harness_seeds() const {
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < harness.seeds; ++i) seeds.push_back(run.seed + static_cast<std::uint64_t>(i));
  return seeds;
}

RunConfig parse_config(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::invalid_config,
                fmt::format("config line {}: {}", e.line(), e.message()));
  }
  RunConfig cfg;
  auto table = fields(&cfg);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw Error(ErrorCode::invalid_config, "key '" + section + "' outside of a section");
    }
    if (!kSections.count(section)) {
      throw Error(ErrorCode::invalid_config, "unknown config section '" + section + "'");
    }
    for (const auto& [key, value] : body) {
      const std::string name = section + "." + key;
      auto it = table.find(name);
      if (it == table.end()) throw Error(ErrorCode::invalid_config, "unknown config key '" + name + "'");
      it->second.set(name, value.data());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::input, "cannot open config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string canonical_string(const RunConfig& cfg) {
  RunConfig copy = cfg;
  std::string out;
  for (const auto& [name, field] : fields(&copy)) out += name + "=" + field.get() + "\n";
  return out;
}

std::string config_hash(const RunConfig& cfg) {
  return fmt::format("{:016x}", mix64(hash_string(canonical_string(cfg))));
}

}  // namespace amcs::config

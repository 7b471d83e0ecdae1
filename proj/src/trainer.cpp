#include "amcs/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "amcs/error.hpp"
#include "amcs/random.hpp"
#include "amcs/text.hpp"

namespace amcs::trainer {

void TrainConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& what) {
    throw Error(ErrorCode::invalid_config, "trainer." + key + ": " + what);
  };
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    fail("learning_rate", "must be a positive real");
  }
  if (epochs < 1) fail("epochs", "must be >= 1");
  if (batch_size < 1) fail("batch_size", "must be >= 1");
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double score(const LinearScorer& model, std::span<const double> features) {
  if (features.size() != model.dim()) {
    throw Error(ErrorCode::shape, fmt::format("feature dimension {} does not match model dimension {}",
                                              features.size(), model.dim()));
  }
  double z = model.bias;
  for (std::size_t i = 0; i < features.size(); ++i) z += model.weights[i] * features[i];
  return sigmoid(z);
}

double bce_soft_loss(double pred, double target) {
  const double p = std::clamp(pred, kProbClamp, 1.0 - kProbClamp);
  return -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
}

double batch_loss(const LinearScorer& model, std::span<const TrainingExample> batch) {
  if (batch.empty()) throw Error(ErrorCode::empty_dataset, "loss over an empty batch");
  double sum = 0.0;
  for (const auto& ex : batch) sum += bce_soft_loss(score(model, ex.features), ex.target);
  return sum / static_cast<double>(batch.size());
}

Gradient loss_gradient(const LinearScorer& model, std::span<const TrainingExample> batch) {
  if (batch.empty()) throw Error(ErrorCode::empty_dataset, "gradient over an empty batch");
  Gradient g{std::vector<double>(model.dim(), 0.0), 0.0};
  for (const auto& ex : batch) {
    const double r = score(model, ex.features) - ex.target;
    for (std::size_t i = 0; i < model.dim(); ++i) g.weights[i] += r * ex.features[i];
    g.bias += r;
  }
  const double n = static_cast<double>(batch.size());
  for (auto& w : g.weights) w /= n;
  g.bias /= n;
  return g;
}

TrainResult train(std::span<const TrainingExample> examples, const TrainConfig& cfg) {
  cfg.validate();
  if (examples.empty()) throw Error(ErrorCode::empty_dataset, "empty dataset");
  const std::size_t dim = examples.front().features.size();
  for (const auto& ex : examples) {
    if (ex.features.size() != dim) throw Error(ErrorCode::shape, "inconsistent feature dimension");
    if (!(ex.target >= 0.0 && ex.target <= 1.0)) {
      throw Error(ErrorCode::validation, "training target outside [0,1]");
    }
  }

  TrainResult result;
  result.model = LinearScorer(dim);
  result.initial_loss = batch_loss(result.model, examples);

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(cfg.seed, "train"));
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  std::vector<TrainingExample> chunk;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
      std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }
    for (std::size_t start = 0; start < order.size(); start += batch) {
      chunk.clear();
      for (std::size_t k = start; k < std::min(order.size(), start + batch); ++k) {
        chunk.push_back(examples[order[k]]);
      }
      const auto g = loss_gradient(result.model, chunk);
      for (std::size_t d = 0; d < dim; ++d) result.model.weights[d] -= cfg.learning_rate * g.weights[d];
      result.model.bias -= cfg.learning_rate * g.bias;
    }
    result.loss_curve.push_back(batch_loss(result.model, examples));
  }
  return result;
}

rollout::Vec<kRecordFeatures> raw_record_features(const dataset::SupervisionRecord& record) {
  int tokens = 0;
  for (const auto& s : record.prefix_steps) tokens += text::count_tokens(s);
  return {static_cast<double>(record.step_index), static_cast<double>(tokens),
          static_cast<double>(record.search_depth), static_cast<double>(record.n_total)};
}

TrainingSet make_training_set(std::span<const dataset::SupervisionRecord> records) {
  if (records.empty()) throw Error(ErrorCode::empty_dataset, "empty dataset");
  std::vector<rollout::Vec<kRecordFeatures>> raw;
  raw.reserve(records.size());
  for (const auto& r : records) raw.push_back(raw_record_features(r));
  TrainingSet set;
  set.stats = rollout::fit_feature_stats<kRecordFeatures>(raw);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto z = rollout::standardize(raw[i], set.stats);
    set.examples.push_back({std::vector<double>(z.begin(), z.end()), records[i].mu_hat});
  }
  return set;
}

namespace {

std::string join_doubles(std::span<const double> values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ' ';
    out += fmt::format("{:.17g}", values[i]);
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw Error(ErrorCode::parse, "checkpoint key '" + key + "': bad number '" + tok + "'");
    }
  }
  return out;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing", 0);
  out << "dim = " << checkpoint.model.dim() << '\n';
  out << "feature_names = " << text::join(checkpoint.feature_names, " ") << '\n';
  out << "weights = " << join_doubles(checkpoint.model.weights) << '\n';
  out << "bias = " << fmt::format("{:.17g}", checkpoint.model.bias) << '\n';
  out << "mean = " << join_doubles(checkpoint.stats.mean) << '\n';
  out << "std = " << join_doubles(checkpoint.stats.std) << '\n';
  out.flush();
  if (!out) throw IoError("write to " + path + " failed", 0);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::input, "cannot open checkpoint " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::parse, "checkpoint line without '=': " + line);
    kv[std::string(text::trim(std::string_view(line).substr(0, eq)))] =
        std::string(text::trim(std::string_view(line).substr(eq + 1)));
  }
  for (const char* key : {"dim", "feature_names", "weights", "bias", "mean", "std"}) {
    if (!kv.count(key)) throw Error(ErrorCode::parse, std::string("checkpoint missing key '") + key + "'");
  }
  Checkpoint c;
  const auto dim = parse_doubles(kv["dim"], "dim");
  c.model.weights = parse_doubles(kv["weights"], "weights");
  const auto bias = parse_doubles(kv["bias"], "bias");
  const auto mean = parse_doubles(kv["mean"], "mean");
  const auto sd = parse_doubles(kv["std"], "std");
  if (dim.size() != 1 || bias.size() != 1 || c.model.weights.size() != static_cast<std::size_t>(dim[0]) ||
      mean.size() != kRecordFeatures || sd.size() != kRecordFeatures) {
    throw Error(ErrorCode::shape, "checkpoint dimensions are inconsistent");
  }
  c.model.bias = bias[0];
  std::copy(mean.begin(), mean.end(), c.stats.mean.begin());
  std::copy(sd.begin(), sd.end(), c.stats.std.begin());
  std::istringstream names(kv["feature_names"]);
  std::string name;
  while (names >> name) c.feature_names.push_back(name);
  return c;
}

}  // namespace amcs::trainer

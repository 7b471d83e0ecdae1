#include "amcs/cli.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "amcs/dataset.hpp"
#include "amcs/harness.hpp"
#include "amcs/random.hpp"
#include "amcs/remote.hpp"
#include "amcs/search.hpp"
#include "amcs/trainer.hpp"

namespace amcs::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_config: return kConfig;
    case ErrorCode::input: return kInput;
    case ErrorCode::parse:
    case ErrorCode::validation:
    case ErrorCode::invalid_problem: return kData;
    case ErrorCode::transport: return kTransport;
    case ErrorCode::io: return kIo;
    case ErrorCode::empty_dataset: return kEmptyDataset;
    default: return kInternal;
  }
}

namespace {

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error (internal): " << e.what() << '\n';
    return kInternal;
  }
}

void setup_logging(const std::string& level) {
  auto logger = spdlog::get("amcs");
  if (!logger) logger = spdlog::stderr_color_mt("amcs");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(level));
}

void ensure_parent(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw IoError("cannot create directory " + parent.string() + ": " + ec.message(), 0);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message(), 0);
}

void write_text(const std::string& path, const std::string& content) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing", 0);
  out << content;
  out.flush();
  if (!out) throw IoError("write to " + path + " failed", 0);
}

std::unique_ptr<rollout::RolloutSource> make_source(const config::RunConfig& cfg) {
  if (cfg.run.source == "remote") return std::make_unique<remote::RemoteSource>(cfg.remote);
  return std::make_unique<rollout::SimulatedSource>(
      std::make_shared<rollout::HashedSimWorld>(cfg.sim_world()));
}

std::string out_dir(const CommonOptions& options, const config::RunConfig& cfg) {
  return options.out.empty() ? cfg.run.out_dir : options.out;
}

std::string fmt_opt(const std::optional<double>& v) {
  return v ? fmt::format("{:.3f}", *v) : std::string("-");
}

}  // namespace

config::RunConfig resolve_config(const CommonOptions& options) {
  config::RunConfig cfg =
      options.config_path.empty() ? config::RunConfig{} : config::load_config(options.config_path);
  if (options.seed) cfg.run.seed = *options.seed;
  if (!options.source.empty()) cfg.run.source = options.source;
  cfg.validate();
  setup_logging(cfg.run.log_level);
  return cfg;
}

int cmd_generate(const CommonOptions& options, const std::string& problems_path) {
  return guarded([&] {
    const auto cfg = resolve_config(options);
    auto problems = rollout::load_problems(problems_path);
    std::sort(problems.begin(), problems.end(),
              [](const auto& a, const auto& b) { return a.id < b.id; });
    const auto source = make_source(cfg);

    std::vector<search::SearchResult> results(problems.size());
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto worker = [&] {
      for (std::size_t i = next++; i < problems.size(); i = next++) {
        const auto& p = problems[i];
        results[i] = search::run_search(p, *source, cfg.search, cfg.estimator,
                                        derive_seed(cfg.run.seed, p.id), cfg.run.generator_tag);
        std::lock_guard lock(log_mutex);
        if (results[i].error) {
          spdlog::error("problem {}: {}", p.id, *results[i].error);
        } else {
          spdlog::info("problem {}: {} records", p.id, results[i].records.size());
        }
      }
    };
    const auto width = std::min<std::size_t>(static_cast<std::size_t>(cfg.run.max_parallel_problems),
                                             std::max<std::size_t>(problems.size(), 1));
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < width; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::vector<dataset::SupervisionRecord> records;
    ordered_json per_problem = ordered_json::array();
    int failures = 0;
    for (std::size_t i = 0; i < problems.size(); ++i) {
      auto& r = results[i];
      ordered_json entry;
      entry["problem_id"] = problems[i].id;
      entry["records"] = r.records.size();
      entry["tree_nodes"] = r.root.subtree_size();
      entry["iterations"] = r.trace.entries.size();
      if (r.error) {
        entry["error"] = *r.error;
        ++failures;
      }
      per_problem.push_back(std::move(entry));
      for (auto& rec : r.records) records.push_back(std::move(rec));
    }

    const std::string out =
        options.out.empty() ? (fs::path(cfg.run.out_dir) / "dataset.jsonl").string() : options.out;
    ensure_parent(out);
    const auto written = dataset::export_jsonl(records, out);

    ordered_json manifest;
    manifest["config_hash"] = config::config_hash(cfg);
    manifest["seed"] = cfg.run.seed;
    manifest["source"] = cfg.run.source;
    manifest["generator_tag"] = cfg.run.generator_tag;
    manifest["problems"] = problems.size();
    manifest["records"] = written;
    manifest["failed_problems"] = failures;
    manifest["dataset"] = fs::path(out).filename().string();
    manifest["per_problem"] = std::move(per_problem);
    write_text(out + ".manifest.json", manifest.dump(2) + "\n");

    std::cout << fmt::format("wrote {} records for {} problems to {}\n", written, problems.size(), out);
    if (failures > 0) {
      std::cerr << fmt::format("error (partial): {} of {} problems failed, see the manifest\n",
                               failures, problems.size());
      return static_cast<int>(kPartial);
    }
    return static_cast<int>(kOk);
  });
}

int cmd_estimate(const CommonOptions& options, const std::string& problems_path,
                 const std::string& problem_id, const std::vector<std::string>& prefix) {
  return guarded([&] {
    const auto cfg = resolve_config(options);
    const auto problems = rollout::load_problems(problems_path);
    if (problems.empty()) throw Error(ErrorCode::input, "problems file is empty");
    auto it = problems.begin();
    if (!problem_id.empty()) {
      it = std::find_if(problems.begin(), problems.end(),
                        [&](const auto& p) { return p.id == problem_id; });
      if (it == problems.end()) throw Error(ErrorCode::input, "no problem with id '" + problem_id + "'");
    }
    const auto source = make_source(cfg);
    std::uint64_t seed = derive_seed(derive_seed(cfg.run.seed, it->id), "estimate");
    for (const auto& step : prefix) seed = derive_seed(seed, step);
    const auto est = estimation::estimate_node(prefix, *it, *source, cfg.estimator, seed);

    ordered_json j;
    j["problem_id"] = it->id;
    j["prefix_steps"] = prefix;
    j["mu_hat"] = est.mu_hat;
    j["delta_node"] = est.delta_node;
    j["n_total"] = est.n_total;
    j["termination_reason"] = estimation::to_string(est.termination_reason);
    j["iterations"] = est.iterations;
    auto clusters = ordered_json::array();
    for (const auto& c : est.per_cluster) {
      clusters.push_back({{"n", c.n}, {"s", c.s}, {"p_hat", c.p_hat}, {"delta", c.delta}});
    }
    j["per_cluster"] = std::move(clusters);
    j["seed"] = seed;
    std::cout << j.dump() << '\n';
    return static_cast<int>(kOk);
  });
}

int cmd_benchmark(const CommonOptions& options) {
  return guarded([&] {
    const auto cfg = resolve_config(options);
    if (cfg.run.source != "sim") {
      throw Error(ErrorCode::invalid_config, "run.source: benchmark runs on the simulated source only");
    }
    const auto forest = harness::make_forest(cfg.forest_spec());
    harness::ComparisonOptions opts;
    opts.fixed_n = cfg.harness.fixed_n;
    opts.match_budget = cfg.harness.match_budget;
    const auto report = harness::run_comparison(forest, cfg.estimator, cfg.harness_seeds(), opts);

    const auto dir = out_dir(options, cfg);
    ensure_dir(dir);
    harness::write_node_csv(report, (fs::path(dir) / "nodes.csv").string());
    harness::write_summary_csv(report, (fs::path(dir) / "summary.csv").string());

    std::cout << fmt::format("{:<9} {:>8} {:>9} {:>7} {:>7} {:>7} {:>7} {:>7} {:>9}\n", "policy",
                             "mae", "rollouts", "b0", "b1", "b2", "b3", "b4", "mid/ext");
    for (const auto* s : {&report.adaptive, &report.fixed}) {
      std::cout << fmt::format("{:<9} {:>8.4f} {:>9.2f} {:>7} {:>7} {:>7} {:>7} {:>7} {:>9}\n",
                               s->policy, s->mae, s->mean_rollouts, fmt_opt(s->bucket_rollouts[0]),
                               fmt_opt(s->bucket_rollouts[1]), fmt_opt(s->bucket_rollouts[2]),
                               fmt_opt(s->bucket_rollouts[3]), fmt_opt(s->bucket_rollouts[4]),
                               fmt_opt(s->mid_extreme_ratio));
    }
    if (report.sign) {
      std::cout << fmt::format(
          "sign test over {} seeds: adaptive better {}, worse {}, ties {}; "
          "p(adaptive better) = {:.4f}, p(fixed better) = {:.4f}\n",
          report.seeds.size(), report.sign->wins, report.sign->losses, report.sign->ties,
          report.sign->p_superior, report.sign->p_inferior);
    } else {
      std::cout << "sign test skipped: needs at least two seeds\n";
    }
    return static_cast<int>(kOk);
  });
}

int cmd_stats(const CommonOptions& options, const std::string& dataset_path) {
  return guarded([&] {
    const auto cfg = resolve_config(options);
    const auto records = dataset::import_jsonl(dataset_path);
    const auto stats = dataset::compute_stats(records);
    const auto report = dataset::allocation_report(records);
    const auto dir = out_dir(options, cfg);
    ensure_dir(dir);
    write_text((fs::path(dir) / "stats.json").string(), dataset::stats_to_json(stats, report) + "\n");
    dataset::write_allocation_csv(report, (fs::path(dir) / "allocation.csv").string());

    std::cout << fmt::format("records {}  problems {}  mean steps {:.3f}  mean tokens/step {:.3f}\n",
                             stats.record_count, stats.problem_count, stats.mean_steps,
                             stats.mean_tokens_per_step);
    std::cout << fmt::format("{:<11} {:>6} {:>9} {:>7} {:>7}\n", "mu bucket", "count", "rollouts",
                             "depth", "nodes");
    for (const auto& row : report.rows) {
      std::cout << fmt::format("[{:.1f},{:.1f}{} {:>6} {:>9} {:>7} {:>7}\n", row.bucket_lo,
                               row.bucket_hi, row.bucket_hi == 1.0 ? "]" : ")", row.count,
                               fmt_opt(row.mean_rollouts), fmt_opt(row.mean_depth),
                               fmt_opt(row.mean_nodes));
    }
    std::cout << "mid/extreme ratio: " << fmt_opt(report.mid_extreme_ratio) << '\n';
    return static_cast<int>(kOk);
  });
}

int cmd_train(const CommonOptions& options, const std::string& dataset_path) {
  return guarded([&] {
    const auto cfg = resolve_config(options);
    const auto records = dataset::import_jsonl(dataset_path);
    const auto set = trainer::make_training_set(records);
    const auto result = trainer::train(set.examples, cfg.trainer);
    const auto dir = out_dir(options, cfg);
    ensure_dir(dir);

    trainer::Checkpoint checkpoint;
    checkpoint.model = result.model;
    checkpoint.stats = set.stats;
    checkpoint.feature_names.assign(trainer::kFeatureNames.begin(), trainer::kFeatureNames.end());
    trainer::save_checkpoint(checkpoint, (fs::path(dir) / "model.txt").string());

    std::string curve = "epoch,loss\n";
    curve += fmt::format("0,{}\n", result.initial_loss);
    for (std::size_t i = 0; i < result.loss_curve.size(); ++i) {
      curve += fmt::format("{},{}\n", i + 1, result.loss_curve[i]);
    }
    write_text((fs::path(dir) / "loss_curve.csv").string(), curve);
    std::cout << fmt::format("trained on {} examples: loss {:.6f} -> {:.6f}\n", set.examples.size(),
                             result.initial_loss, result.loss_curve.back());
    return static_cast<int>(kOk);
  });
}

int run(int argc, char** argv) {
  CLI::App app{"Adaptive Monte Carlo search for step-level value supervision"};
  app.require_subcommand(1);

  CommonOptions common;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "INI configuration file");
    sub->add_option("--seed", seed, "global seed (overrides run.seed)");
    sub->add_option("--out", common.out, "output path (file for generate, directory otherwise)");
    sub->add_option("--source", common.source, "rollout source")->check(CLI::IsMember({"sim", "remote"}));
  };

  std::string problems;
  std::string dataset_path;
  std::string problem_id;
  std::vector<std::string> steps;

  auto* gen = app.add_subcommand("generate", "run the search over a problems file and write JSONL");
  add_common(gen);
  gen->add_option("--problems", problems, "problems JSONL (id, problem, answer)")->required();

  auto* est = app.add_subcommand("estimate", "estimate the value of one prefix and print JSON");
  add_common(est);
  est->add_option("--problems", problems, "problems JSONL")->required();
  est->add_option("--problem-id", problem_id, "problem to use (default: first)");
  est->add_option("--step", steps, "prefix step, repeatable");

  auto* bench = app.add_subcommand("benchmark", "compare adaptive and fixed-budget estimation");
  add_common(bench);

  auto* stats = app.add_subcommand("stats", "dataset statistics and allocation report");
  add_common(stats);
  stats->add_option("--dataset", dataset_path, "supervision JSONL")->required();

  auto* tr = app.add_subcommand("train", "fit the soft-label scorer");
  add_common(tr);
  tr->add_option("--dataset", dataset_path, "supervision JSONL")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int status = app.exit(e);
    return status == 0 ? kOk : kConfig;
  }

  for (auto* sub : {gen, est, bench, stats, tr}) {
    if (sub->parsed() && sub->count("--seed") > 0) common.seed = seed;
  }
  if (gen->parsed()) return cmd_generate(common, problems);
  if (est->parsed()) return cmd_estimate(common, problems, problem_id, steps);
  if (bench->parsed()) return cmd_benchmark(common);
  if (stats->parsed()) return cmd_stats(common, dataset_path);
  if (tr->parsed()) return cmd_train(common, dataset_path);
  return kInternal;
}

}  // namespace amcs::cli

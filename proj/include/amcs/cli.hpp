#pragma once

/**
 * Command-line front end: generate, estimate, benchmark, stats, train.
 *
 * Every command accepts --config, --seed, --out and --source. Failures are
 * reported on stderr and mapped to the exit codes below.
 */

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "amcs/config.hpp"
#include "amcs/error.hpp"

namespace amcs::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kConfig = 2,
  kInput = 3,
  kData = 4,
  kTransport = 5,
  kIo = 6,
  kEmptyDataset = 7,
  kPartial = 8,
};

int exit_code(ErrorCode code);

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string source;
};

/// Loads the config (defaults when no path) and applies the command-line overrides.
config::RunConfig resolve_config(const CommonOptions& options);

int cmd_generate(const CommonOptions& options, const std::string& problems_path);
int cmd_estimate(const CommonOptions& options, const std::string& problems_path,
                 const std::string& problem_id, const std::vector<std::string>& prefix);
int cmd_benchmark(const CommonOptions& options);
int cmd_stats(const CommonOptions& options, const std::string& dataset_path);
int cmd_train(const CommonOptions& options, const std::string& dataset_path);

/// Parses argv and dispatches; returns the process exit status.
int run(int argc, char** argv);

}  // namespace amcs::cli

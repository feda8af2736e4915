#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "samrank/config.hpp"

namespace samrank::cli {

enum ExitCode : int { kOk = 0, kInvariantFailure = 1, kUsageError = 2 };

/// Command-line values that take precedence over the config file.
struct Overrides {
  std::optional<std::filesystem::path> config;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<double>> thresholds;
  std::optional<bool> center;
  std::optional<std::size_t> jobs;
};

/// Loads the config (defaults when none is given) and applies overrides.
/// Throws config::ConfigError or std::runtime_error.
config::RunConfig resolve_config(const Overrides& ov, bool sweep);

/// Writes train_log.csv, final_net.bin and summary.json into the output dir.
int cmd_train(const Overrides& ov, std::ostream& out, std::ostream& err);

/// Writes sweep_results.csv, sweep_medians.csv and sweep_summary.json.
int cmd_sweep(const Overrides& ov, std::ostream& out, std::ostream& err);

struct RankOptions {
  std::filesystem::path matrix;
  std::vector<double> thresholds{0.95, 0.99, 0.999, 0.9999};
  bool center = true;
  std::filesystem::path out_dir = ".";
};
/// Prints a rank table and writes rank_report.json.
int cmd_rank(const RankOptions& opts, std::ostream& out, std::ostream& err);

struct CheckOptions {
  std::size_t trials = 1000;
  std::uint64_t seed = 0;
  std::size_t training_steps = 60000;
  bool flip_regularization_sign = false;  // test hook
};
int cmd_check(const CheckOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace samrank::cli

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "samrank/commands.hpp"
#include "samrank/config.hpp"

namespace {

std::optional<bool> parse_center(const std::string& v) {
  if (v.empty()) return std::nullopt;
  return v == "on";
}

}  // namespace

int main(int argc, char** argv) {
  using namespace samrank;
  CLI::App app{"samrank: sharpness-aware minimization and feature-rank laboratory"};
  app.require_subcommand(1);

  cli::Overrides ov;
  std::string config_path, out_dir, thresholds, center;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  auto add_run_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key=value config file");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed, "seed (train: data, init and sampling; sweep: single seed)");
    cmd->add_option("--thresholds", thresholds, "comma-separated PCA variance thresholds");
    cmd->add_option("--center", center, "mean-center features before PCA")
        ->check(CLI::IsMember({"on", "off"}));
    cmd->add_option("--jobs", jobs, "parallel sweep workers")->check(CLI::PositiveNumber);
  };

  auto* train = app.add_subcommand("train", "train one student on the teacher-student task");
  add_run_flags(train);
  auto* sweep = app.add_subcommand("sweep", "rho x seed sweep with median aggregation");
  add_run_flags(sweep);

  cli::RankOptions rank_opts;
  std::string rank_out = ".";
  auto* rank = app.add_subcommand("rank", "PCA feature rank of an FMAT matrix file");
  rank->add_option("matrix", rank_opts.matrix, "feature matrix file")->required();
  rank->add_option("--thresholds", thresholds, "comma-separated variance thresholds");
  rank->add_option("--center", center, "mean-center features before PCA")
      ->check(CLI::IsMember({"on", "off"}));
  rank->add_option("--out", rank_out, "directory for rank_report.json");

  cli::CheckOptions check_opts;
  auto* check = app.add_subcommand("check", "run the SAM step-decomposition verification battery");
  check->add_option("--trials", check_opts.trials, "random trials per property");
  check->add_option("--seed", check_opts.seed, "battery seed");
  check->add_option("--train-steps", check_opts.training_steps,
                    "steps of the gradient-regularization training comparison (0 skips)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kUsageError;
  }

  try {
    std::optional<std::vector<double>> th;
    if (!thresholds.empty()) th = config::parse_real_list(thresholds);

    if (*train || *sweep) {
      CLI::App* cmd = *train ? train : sweep;
      if (!config_path.empty()) ov.config = config_path;
      if (!out_dir.empty()) ov.out_dir = out_dir;
      if (cmd->count("--seed") > 0) ov.seed = seed;
      ov.thresholds = th;
      ov.center = parse_center(center);
      if (cmd->count("--jobs") > 0) ov.jobs = jobs;
      return *train ? cli::cmd_train(ov, std::cout, std::cerr)
                    : cli::cmd_sweep(ov, std::cout, std::cerr);
    }
    if (*rank) {
      if (th) rank_opts.thresholds = *th;
      if (auto c = parse_center(center)) rank_opts.center = *c;
      rank_opts.out_dir = rank_out;
      return cli::cmd_rank(rank_opts, std::cout, std::cerr);
    }
    return cli::cmd_check(check_opts, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kUsageError;
  }
}

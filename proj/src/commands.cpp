#include "samrank/commands.hpp"

#include <iomanip>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "samrank/diagnostics.hpp"
#include "samrank/experiments.hpp"
#include "samrank/io.hpp"

namespace samrank::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

json config_json(const config::RunConfig& cfg) {
  json j = json::object();
  std::istringstream lines(config::render_config(cfg));
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find(" = ");
    j[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return j;
}

json record_json(const experiments::LogRecord& r, const std::vector<double>& thresholds) {
  json j;
  j["step"] = r.step;
  j["train_loss"] = r.train_loss;
  j["test_loss"] = r.test_loss;
  json ranks = json::object();
  for (std::size_t i = 0; i < thresholds.size() && i < r.ranks.size(); ++i)
    ranks[io::format_real(thresholds[i])] = r.ranks[i];
  j["ranks"] = ranks;
  j["active_units"] = r.active_units;
  j["weight_norm"] = r.weight_norm;
  j["knn_error"] = r.knn_error ? json(*r.knn_error) : json(nullptr);
  return j;
}

std::string provenance(const config::RunConfig& cfg, std::string_view what) {
  return "samrank " + std::string(what) + " config_hash=" + config::config_hash(cfg) +
         " steps=" + std::to_string(cfg.optim.steps);
}

void write_json(const fs::path& path, const json& j) { io::write_file(path, j.dump(2) + "\n"); }

optim::Schedule schedule_for(const config::RunConfig& cfg) {
  optim::Schedule s;
  s.method = cfg.method;
  s.sam = cfg.sam;
  return s;
}

}  // namespace

config::RunConfig resolve_config(const Overrides& ov, bool sweep) {
  config::RunConfig cfg;
  if (ov.config) {
    if (!fs::exists(*ov.config)) {
      throw std::runtime_error("config file '" + ov.config->string() + "' does not exist");
    }
    cfg = config::parse_config(io::read_file(*ov.config), ov.config->string());
  }
  if (ov.out_dir) cfg.out_dir = *ov.out_dir;
  if (ov.seed) {
    if (sweep) {
      cfg.seeds = {*ov.seed};
    } else {
      cfg.ts.seed = *ov.seed;
      cfg.optim.seed = *ov.seed;
    }
  }
  if (ov.thresholds) cfg.diag.thresholds = *ov.thresholds;
  if (ov.center) cfg.diag.center = *ov.center;
  if (ov.jobs) cfg.jobs = *ov.jobs;

  cfg.ts.validate();
  cfg.optim.validate();
  cfg.sam.validate();
  for (double t : cfg.diag.thresholds) {
    if (!(t > 0.0 && t <= 1.0)) throw config::ConfigError("diag.thresholds must lie in (0, 1]");
  }
  if (std::find(cfg.diag.thresholds.begin(), cfg.diag.thresholds.end(),
                cfg.diag.primary_threshold) == cfg.diag.thresholds.end()) {
    cfg.diag.thresholds.push_back(cfg.diag.primary_threshold);
  }
  return cfg;
}

int cmd_train(const Overrides& ov, std::ostream& out, std::ostream& err) {
  config::RunConfig cfg;
  try {
    cfg = resolve_config(ov, false);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  }
  const fs::path dir = cfg.out_dir;
  const std::string hash = config::config_hash(cfg);

  const auto run = experiments::run_teacher_student(cfg.ts, cfg.optim, schedule_for(cfg), cfg.diag);

  io::write_file(dir / "train_log.csv", io::train_log_csv(run.log, provenance(cfg, "train_log")));
  io::write_file(dir / "final_net.bin", io::encode_net(run.net, cfg.optim.seed, hash));

  json summary;
  summary["command"] = "train";
  summary["config_hash"] = hash;
  summary["seed"] = cfg.optim.seed;
  summary["config"] = config_json(cfg);
  summary["steps_run"] = run.steps_run;
  summary["diverged"] = run.diverged;
  summary["final"] = run.log.records.empty() ? json(nullptr)
                                             : record_json(run.log.records.back(), cfg.diag.thresholds);
  write_json(dir / "summary.json", summary);

  out << "train: " << run.steps_run << " steps, config " << hash << '\n';
  if (run.diverged) out << "run diverged (non-finite parameters)\n";
  if (!run.log.records.empty()) {
    const auto& last = run.log.records.back();
    out << "final train_loss " << io::format_real(last.train_loss) << ", test_loss "
        << io::format_real(last.test_loss) << ", active_units " << last.active_units << '\n';
    for (std::size_t i = 0; i < cfg.diag.thresholds.size(); ++i)
      out << "  rank@" << io::format_real(cfg.diag.thresholds[i]) << " = " << last.ranks[i] << '\n';
  }
  out << "wrote " << dir.string() << '\n';
  return kOk;
}

int cmd_sweep(const Overrides& ov, std::ostream& out, std::ostream& err) {
  config::RunConfig cfg;
  experiments::SweepSpec sweep;
  try {
    cfg = resolve_config(ov, true);
    sweep.rho_grid = cfg.rho_grid;
    sweep.seeds = cfg.seeds;
    sweep.method = cfg.method;
    sweep.optim = cfg.optim;
    sweep.active_fraction = cfg.sam.active_fraction;
    sweep.diag = cfg.diag;
    sweep.jobs = cfg.jobs;
    sweep.validate(false);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  }
  const fs::path dir = cfg.out_dir;
  const std::string hash = config::config_hash(cfg);
  const auto res = experiments::run_sweep(sweep, cfg.ts);
  const auto& th = res.thresholds;

  std::ostringstream rows;
  rows << "# " << provenance(cfg, "sweep_results") << '\n';
  rows << "rho,seed,diverged,steps_run,train_loss,test_loss";
  for (double t : th) rows << ",rank@" << io::format_real(t);
  rows << ",active_units,weight_norm,knn_error\n";
  for (const auto& r : res.rows) {
    rows << io::format_real(r.rho) << ',' << r.seed << ',' << (r.diverged ? 1 : 0) << ','
         << r.steps_run << ',' << io::format_real(r.final.train_loss) << ','
         << io::format_real(r.final.test_loss);
    for (std::size_t i = 0; i < th.size(); ++i)
      rows << ',' << (i < r.final.ranks.size() ? std::to_string(r.final.ranks[i]) : "");
    rows << ',' << r.final.active_units << ',' << io::format_real(r.final.weight_norm) << ','
         << (r.final.knn_error ? io::format_real(*r.final.knn_error) : "") << '\n';
  }
  io::write_file(dir / "sweep_results.csv", rows.str());

  std::ostringstream meds;
  meds << "# " << provenance(cfg, "sweep_medians") << '\n';
  meds << "rho,runs,train_loss,test_loss";
  for (double t : th) meds << ",rank@" << io::format_real(t);
  meds << ",active_units,weight_norm\n";
  for (const auto& m : res.medians) {
    meds << io::format_real(m.rho) << ',' << m.runs << ',' << io::format_real(m.train_loss) << ','
         << io::format_real(m.test_loss);
    for (double r : m.ranks) meds << ',' << io::format_real(r);
    meds << ',' << io::format_real(m.active_units) << ',' << io::format_real(m.weight_norm) << '\n';
  }
  io::write_file(dir / "sweep_medians.csv", meds.str());

  if (cfg.diag.cadence > 0) {
    for (const auto& r : res.rows) {
      const std::string name = "rho=" + io::format_real(r.rho) + "_seed=" + std::to_string(r.seed) + ".csv";
      io::write_file(dir / "logs" / name, io::train_log_csv(r.log, provenance(cfg, "train_log")));
    }
  }

  json summary;
  summary["command"] = "sweep";
  summary["config_hash"] = hash;
  summary["config"] = config_json(cfg);
  json medians = json::array();
  for (const auto& m : res.medians) {
    json jm;
    jm["rho"] = m.rho;
    jm["runs"] = m.runs;
    jm["train_loss"] = m.train_loss;
    jm["test_loss"] = m.test_loss;
    json ranks = json::object();
    for (std::size_t i = 0; i < th.size(); ++i) ranks[io::format_real(th[i])] = m.ranks[i];
    jm["ranks"] = ranks;
    jm["active_units"] = m.active_units;
    jm["weight_norm"] = m.weight_norm;
    medians.push_back(jm);
  }
  summary["medians"] = medians;
  std::size_t diverged = 0;
  for (const auto& r : res.rows) diverged += r.diverged ? 1 : 0;
  summary["diverged_runs"] = diverged;
  write_json(dir / "sweep_summary.json", summary);

  const std::size_t p = cfg.diag.primary_index();
  out << "sweep: " << res.rows.size() << " runs (" << diverged << " diverged), config " << hash
      << '\n';
  out << std::setw(8) << "rho" << std::setw(6) << "runs" << std::setw(12) << "rank"
      << std::setw(10) << "active" << std::setw(14) << "weight_norm" << std::setw(14)
      << "test_loss" << '\n';
  for (const auto& m : res.medians) {
    out << std::setw(8) << io::format_real(m.rho) << std::setw(6) << m.runs << std::setw(12)
        << io::format_real(m.ranks[p]) << std::setw(10) << io::format_real(m.active_units)
        << std::setw(14) << std::setprecision(6) << m.weight_norm << std::setw(14)
        << m.test_loss << '\n';
  }
  out << "wrote " << dir.string() << '\n';
  return kOk;
}

int cmd_rank(const RankOptions& opts, std::ostream& out, std::ostream& err) {
  if (opts.thresholds.empty()) {
    err << "error: no thresholds given\n";
    return kUsageError;
  }
  for (double t : opts.thresholds) {
    if (!(t > 0.0 && t <= 1.0)) {
      err << "error: thresholds must lie in (0, 1]\n";
      return kUsageError;
    }
  }
  linalg::Matrix features;
  try {
    if (!fs::exists(opts.matrix)) {
      err << "error: matrix file '" << opts.matrix.string() << "' does not exist\n";
      return kUsageError;
    }
    features = io::read_matrix_file(opts.matrix);
    if (features.rows() == 0 || features.cols() == 0) {
      err << "error: " << opts.matrix.string() << ": empty matrix (" << features.shape_string()
          << ")\n";
      return kUsageError;
    }
  } catch (const std::exception& e) {
    err << "error: " << opts.matrix.string() << ": " << e.what() << '\n';
    return kUsageError;
  }
  const auto rep = diag::feature_rank(features, opts.thresholds, opts.center);

  out << "matrix " << features.shape_string() << ", center " << (opts.center ? "on" : "off")
      << '\n';
  for (std::size_t i = 0; i < rep.thresholds.size(); ++i)
    out << "  rank@" << io::format_real(rep.thresholds[i]) << " = " << rep.ranks[i] << '\n';

  json j;
  j["matrix"] = opts.matrix.string();
  j["rows"] = features.rows();
  j["cols"] = features.cols();
  j["center"] = opts.center;
  json ranks = json::array();
  for (std::size_t i = 0; i < rep.thresholds.size(); ++i)
    ranks.push_back({{"threshold", rep.thresholds[i]}, {"rank", rep.ranks[i]}});
  j["ranks"] = ranks;
  j["eigenvalues"] = rep.spectrum.eigenvalues;
  j["total_variance"] = rep.spectrum.total;
  write_json(opts.out_dir / "rank_report.json", j);
  return kOk;
}

int cmd_check(const CheckOptions& opts, std::ostream& out, std::ostream& err) {
  if (opts.trials == 0) {
    err << "error: --trials must be >= 1 (an empty battery verifies nothing)\n";
    return kUsageError;
  }
  experiments::DecompositionOptions p;
  p.trials = opts.trials;
  p.seed = opts.seed;
  p.training_steps = opts.training_steps;
  p.flip_regularization_sign = opts.flip_regularization_sign;
  const auto report = experiments::run_decomposition_battery(p);

  out << std::left << std::setw(40) << "check" << std::setw(8) << "result" << "detail\n";
  for (const auto& c : report.checks) {
    out << std::setw(40) << c.name << std::setw(8) << (c.passed ? "PASS" : "FAIL") << c.detail;
    if (!c.passed && c.failing_seed) out << " (reproduce with trial seed " << *c.failing_seed << ")";
    out << '\n';
  }
  out << std::right;
  if (!report.all_passed()) {
    for (const auto& c : report.checks)
      if (!c.passed) err << "failed: " << c.name << " (battery seed " << opts.seed << ")\n";
    return kInvariantFailure;
  }
  return kOk;
}

}  // namespace samrank::cli

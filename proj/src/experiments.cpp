#include "samrank/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace samrank::experiments {

using linalg::Matrix;
using nets::Dataset;
using nets::TwoLayerNet;

void TeacherStudentSpec::validate() const {
  if (d_in < 1 || teacher_neurons < 1 || student_neurons < 1 || n_train < 1 || n_test < 1) {
    throw std::invalid_argument("teacher-student counts must all be >= 1");
  }
  if (!(teacher_init_std > 0.0) || !(student_init_std > 0.0) || !(input_std > 0.0)) {
    throw std::invalid_argument("teacher-student init and input stds must be > 0");
  }
  if (!(student_bias_init_std >= 0.0)) {
    throw std::invalid_argument("student_bias_init_std must be >= 0");
  }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

enum Stream : std::uint64_t { kTeacher = 1, kTrainInputs, kTestInputs, kStudent, kReadout };

Matrix gaussian(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

Dataset label_with(const TwoLayerNet& teacher, Matrix inputs) {
  Matrix targets(inputs.rows(), 1);
  for (std::size_t i = 0; i < inputs.rows(); ++i)
    targets(i, 0) = nets::forward(teacher, inputs.row(i))[0];
  return {std::move(inputs), std::move(targets)};
}

std::vector<int> sign_labels(const Dataset& data) {
  std::vector<int> labels(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) labels[i] = data.targets(i, 0) > 0.0 ? 1 : 0;
  return labels;
}

template <class Fn>
void parallel_for(std::size_t count, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

TeacherStudent make_teacher_student(const TeacherStudentSpec& spec) {
  spec.validate();
  TeacherStudent out;
  std::mt19937_64 teacher_rng(derive_seed(spec.seed, kTeacher));
  out.teacher.w = gaussian(spec.teacher_neurons, spec.d_in, spec.teacher_init_std, teacher_rng);
  const Matrix a = gaussian(1, spec.teacher_neurons, spec.teacher_init_std, teacher_rng);
  out.teacher.a.assign(a.data().begin(), a.data().end());
  out.teacher.act = spec.activation;

  std::mt19937_64 train_rng(derive_seed(spec.seed, kTrainInputs));
  std::mt19937_64 test_rng(derive_seed(spec.seed, kTestInputs));
  out.train = label_with(out.teacher, gaussian(spec.n_train, spec.d_in, spec.input_std, train_rng));
  out.test = label_with(out.teacher, gaussian(spec.n_test, spec.d_in, spec.input_std, test_rng));
  return out;
}

TwoLayerNet make_student(const TeacherStudentSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(derive_seed(seed, kStudent));
  TwoLayerNet net;
  net.w = gaussian(spec.student_neurons, spec.d_in, spec.student_init_std, rng);
  const Matrix a = gaussian(1, spec.student_neurons, spec.student_init_std, rng);
  net.a.assign(a.data().begin(), a.data().end());
  net.act = spec.activation;
  if (spec.student_biases) {
    net.b1 = nets::Vector(spec.student_neurons, 0.0);
    if (spec.student_bias_init_std > 0.0) {
      std::normal_distribution<double> dist(0.0, spec.student_bias_init_std);
      for (double& b : *net.b1) b = dist(rng);
    }
    net.b2 = 0.0;
  }
  return net;
}

std::size_t DiagnosticsConfig::primary_index() const {
  for (std::size_t i = 0; i < thresholds.size(); ++i)
    if (thresholds[i] == primary_threshold) return i;
  throw std::invalid_argument("primary threshold is not among the logged thresholds");
}

template <class Net>
LogRecord measure(const Net& net, const Dataset& train, const Dataset& test,
                  const DiagnosticsConfig& diag, std::size_t step, std::size_t block) {
  LogRecord rec;
  rec.step = step;
  rec.train_loss = nets::mean_loss(net, train);
  rec.test_loss = nets::mean_loss(net, test);
  const Matrix feats = diag::feature_matrix(net, train, block);
  rec.ranks = diag::feature_rank(feats, diag.thresholds, diag.center).ranks;
  rec.active_units = diag::active_units(feats).active_units;
  rec.weight_norm = diag::weight_norm(net);
  if (diag.knn_k > 0) {
    const Matrix test_feats = diag::feature_matrix(net, test, block);
    const auto train_labels = sign_labels(train);
    const auto test_labels = sign_labels(test);
    rec.knn_error = diag::knn_error(feats, train_labels, test_feats, test_labels,
                                    std::min(diag.knn_k, train.size()));
  }
  return rec;
}

template LogRecord measure<TwoLayerNet>(const TwoLayerNet&, const Dataset&, const Dataset&,
                                        const DiagnosticsConfig&, std::size_t, std::size_t);
template LogRecord measure<nets::Mlp>(const nets::Mlp&, const Dataset&, const Dataset&,
                                      const DiagnosticsConfig&, std::size_t, std::size_t);

RunResult run_teacher_student(const TeacherStudentSpec& ts, const optim::OptimConfig& optim,
                              const optim::Schedule& schedule, const DiagnosticsConfig& diag) {
  const TeacherStudent task = make_teacher_student(ts);
  RunResult out;
  out.log.thresholds = diag.thresholds;
  const std::size_t cadence = diag.cadence > 0 ? diag.cadence : optim.steps;
  auto result = optim::train(make_student(ts, ts.seed), task.train, optim, schedule, cadence,
                             [&](std::size_t step, const TwoLayerNet& net) {
                               out.log.records.push_back(
                                   measure(net, task.train, task.test, diag, step));
                             });
  out.net = std::move(result.net);
  out.diverged = result.diverged;
  out.steps_run = result.steps_run;
  return out;
}

void SweepSpec::validate(bool strict) const {
  if (rho_grid.empty()) throw std::invalid_argument("sweep: rho_grid is empty");
  if (seeds.empty()) throw std::invalid_argument("sweep: seeds is empty");
  for (double r : rho_grid)
    if (!(r >= 0.0)) throw std::invalid_argument("sweep: rho values must be >= 0");
  if (strict) {
    const bool has_zero = std::find(rho_grid.begin(), rho_grid.end(), 0.0) != rho_grid.end();
    const bool has_large =
        std::any_of(rho_grid.begin(), rho_grid.end(), [](double r) { return r >= 0.4; });
    if (!has_zero || !has_large) {
      throw std::invalid_argument("sweep: rho_grid must contain 0 and a value >= 0.4");
    }
  }
  optim.validate();
  diag.primary_index();
}

double median(std::vector<double> values) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

SweepResult run_sweep(const SweepSpec& sweep, const TeacherStudentSpec& ts) {
  sweep.validate(false);
  ts.validate();
  SweepResult out;
  out.thresholds = sweep.diag.thresholds;
  const std::size_t n_seeds = sweep.seeds.size();
  out.rows.resize(sweep.rho_grid.size() * n_seeds);

  parallel_for(out.rows.size(), sweep.jobs, [&](std::size_t cell) {
    const double rho = sweep.rho_grid[cell / n_seeds];
    const std::uint64_t seed = sweep.seeds[cell % n_seeds];
    TeacherStudentSpec cell_ts = ts;
    cell_ts.seed = seed;
    optim::OptimConfig cfg = sweep.optim;
    cfg.seed = seed;
    optim::Schedule schedule;
    schedule.method = sweep.method;
    schedule.sam.rho = rho;
    schedule.sam.active_fraction = sweep.active_fraction;

    RunResult run = run_teacher_student(cell_ts, cfg, schedule, sweep.diag);
    SweepRow& row = out.rows[cell];
    row.rho = rho;
    row.seed = seed;
    row.steps_run = run.steps_run;
    row.diverged = run.diverged;
    if (!run.diverged && !run.log.records.empty()) {
      row.final = run.log.records.back();
      row.diverged = !std::isfinite(row.final.train_loss);
    } else if (run.diverged) {
      row.final.step = run.steps_run;
      row.final.train_loss = std::nan("");
      row.final.test_loss = std::nan("");
    } else {
      // steps == 0: measure the initial student
      const TeacherStudent task = make_teacher_student(cell_ts);
      row.final = measure(run.net, task.train, task.test, sweep.diag, 0);
    }
    row.log = std::move(run.log);
  });

  for (std::size_t ri = 0; ri < sweep.rho_grid.size(); ++ri) {
    SweepMedian med;
    med.rho = sweep.rho_grid[ri];
    std::vector<double> train_loss, test_loss, active, norm;
    std::vector<std::vector<double>> ranks(out.thresholds.size());
    for (std::size_t si = 0; si < n_seeds; ++si) {
      const SweepRow& row = out.rows[ri * n_seeds + si];
      if (row.diverged) continue;
      ++med.runs;
      train_loss.push_back(row.final.train_loss);
      test_loss.push_back(row.final.test_loss);
      active.push_back(static_cast<double>(row.final.active_units));
      norm.push_back(row.final.weight_norm);
      for (std::size_t t = 0; t < ranks.size(); ++t)
        ranks[t].push_back(static_cast<double>(row.final.ranks[t]));
    }
    med.train_loss = median(train_loss);
    med.test_loss = median(test_loss);
    med.active_units = median(active);
    med.weight_norm = median(norm);
    for (auto& r : ranks) med.ranks.push_back(median(r));
    out.medians.push_back(std::move(med));
  }
  return out;
}

bool DecompositionReport::all_passed() const {
  return !checks.empty() &&
         std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

double first_order_ratio(const TwoLayerNet& net, std::span<const double> x, double y, double lr,
                         double rho) {
  const Dataset single{Matrix(1, x.size(), std::vector<double>(x.begin(), x.end())),
                       Matrix(1, 1, std::vector<double>{y})};
  const std::size_t idx[] = {0};
  optim::OptimConfig cfg;
  cfg.learning_rate = lr;
  auto gap = [&](double r) {
    optim::SamConfig sam;
    sam.rho = r;
    const auto p_sam = nets::flatten(optim::sam_step(net, single, idx, cfg, sam).net);
    const auto p_reg = nets::flatten(optim::gradreg_step(net, single, idx, cfg, r));
    double acc = 0.0;
    for (std::size_t i = 0; i < p_sam.size(); ++i) acc += (p_sam[i] - p_reg[i]) * (p_sam[i] - p_reg[i]);
    return std::sqrt(acc);
  };
  return gap(rho) / gap(rho / 2.0);
}

namespace {

TwoLayerNet random_net(std::mt19937_64& rng, nets::Activation act, bool biases) {
  std::uniform_int_distribution<std::size_t> width(1, 20);
  std::uniform_int_distribution<std::size_t> dim(1, 5);
  const std::size_t m = width(rng);
  const std::size_t d = dim(rng);
  TwoLayerNet net;
  net.w = gaussian(m, d, 1.0 / std::sqrt(static_cast<double>(d)), rng);
  const Matrix a = gaussian(1, m, 1.0 / std::sqrt(static_cast<double>(m)), rng);
  net.a.assign(a.data().begin(), a.data().end());
  net.act = act;
  if (biases) {
    const Matrix b = gaussian(1, m, 0.5, rng);
    net.b1 = nets::Vector(b.data().begin(), b.data().end());
    net.b2 = std::normal_distribution<double>(0.0, 0.5)(rng);
  }
  return net;
}

nets::Vector random_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  nets::Vector v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

CheckResult named_check(std::string name) {
  CheckResult c;
  c.name = std::move(name);
  return c;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

DecompositionReport run_decomposition_battery(const DecompositionOptions& opts) {
  if (opts.trials == 0) throw std::invalid_argument("decomposition battery: trials must be >= 1");
  DecompositionReport report;
  optim::OptimConfig cfg;
  cfg.learning_rate = 0.1;
  optim::SamConfig sam;
  sam.rho = 0.1;

  CheckResult sign = named_check("regularization_nonnegative");
  CheckResult identity = named_check("effective_lr_identity");
  CheckResult step_match = named_check("decomposition_matches_gradreg_step");
  for (std::size_t t = 0; t < opts.trials; ++t) {
    const std::uint64_t trial_seed = derive_seed(opts.seed, 1000 + t);
    std::mt19937_64 rng(trial_seed);
    const TwoLayerNet net = random_net(rng, nets::Activation::relu, false);
    const nets::Vector x = random_vector(net.input_dim(), rng);
    double y = std::normal_distribution<double>(0.0, 1.0)(rng);
    if (nets::forward(net, x)[0] == y) y += 1.0;

    optim::SamStepReport rep = optim::decompose_sam_step(net, x, y, cfg, sam);
    if (opts.flip_regularization_sign)
      for (double& v : rep.regularization) v = -v;

    const double xx = linalg::dot(x, x);
    bool ok_sign = true;
    for (std::size_t j = 0; j < net.width(); ++j) {
      const double driver = nets::activate(net.act, rep.preact_before[j]) * xx;
      const double c = rep.regularization[j];
      if (!(c >= 0.0) || ((c > 0.0) != (driver > 0.0))) ok_sign = false;
    }
    ++sign.trials;
    if (!ok_sign) {
      ++sign.failures;
      if (!sign.failing_seed) sign.failing_seed = trial_seed;
    }

    ++identity.trials;
    const double expected_lr =
        rep.model_grad_norm > 0.0
            ? cfg.learning_rate * (1.0 + sam.rho * rep.model_grad_norm / std::abs(rep.residual))
            : cfg.learning_rate;
    if (rep.effective_lr != expected_lr) {
      ++identity.failures;
      if (!identity.failing_seed) identity.failing_seed = trial_seed;
    }

    ++step_match.trials;
    bool ok_step = true;
    for (std::size_t j = 0; j < net.width(); ++j) {
      // Skip neurons whose finite-difference probe may straddle the kink.
      if (std::abs(rep.preact_before[j]) < 1e-3) continue;
      const double actual = rep.preact_after_gradreg[j] - rep.preact_before[j];
      const double predicted = -(rep.data_fitting[j] + rep.regularization[j]);
      const double scale = 1.0 + std::abs(rep.data_fitting[j]) + std::abs(rep.regularization[j]);
      if (std::abs(actual - predicted) > 1e-6 * scale) ok_step = false;
    }
    if (!ok_step) {
      ++step_match.failures;
      if (!step_match.failing_seed) step_match.failing_seed = trial_seed;
    }
  }
  for (CheckResult* c : {&sign, &identity, &step_match}) {
    c->passed = c->failures == 0;
    c->detail = std::to_string(c->failures) + " of " + std::to_string(c->trials) + " trials failed";
    report.checks.push_back(std::move(*c));
  }

  CheckResult scaling = named_check("first_order_rho_squared_scaling");
  double worst_low = 1e300, worst_high = -1e300;
  for (std::size_t t = 0; t < opts.scaling_nets; ++t) {
    const std::uint64_t trial_seed = derive_seed(opts.seed, 500000 + t);
    std::mt19937_64 rng(trial_seed);
    const TwoLayerNet net = random_net(rng, nets::Activation::tanh, true);
    const nets::Vector x = random_vector(net.input_dim(), rng);
    const double y = std::normal_distribution<double>(0.0, 1.0)(rng);
    const double ratio = first_order_ratio(net, x, y, cfg.learning_rate, opts.scaling_rho);
    worst_low = std::min(worst_low, ratio);
    worst_high = std::max(worst_high, ratio);
    ++scaling.trials;
    if (!(ratio >= 3.0 && ratio <= 5.0)) {
      ++scaling.failures;
      if (!scaling.failing_seed) scaling.failing_seed = trial_seed;
    }
  }
  scaling.passed = scaling.trials > 0 && scaling.failures == 0;
  scaling.detail = "ratio range [" + format_double(worst_low) + ", " + format_double(worst_high) +
                   "] over " + std::to_string(scaling.trials) + " nets";
  if (scaling.trials > 0) report.checks.push_back(std::move(scaling));

  if (opts.training_steps > 0 && !opts.training_seeds.empty()) {
    SweepSpec sweep;
    sweep.rho_grid = {0.0, opts.training_rho};
    sweep.seeds = opts.training_seeds;
    sweep.method = optim::Method::gradreg;
    sweep.optim.steps = opts.training_steps;
    const SweepResult res = run_sweep(sweep, TeacherStudentSpec{});
    const std::size_t p = sweep.diag.primary_index();
    const SweepMedian& base = res.medians[0];
    const SweepMedian& reg = res.medians[1];
    CheckResult ordering = named_check("gradreg_training_rank_ordering");
    ordering.trials = res.rows.size();
    // A median over a minority of surviving seeds says little, so most runs
    // in each cell have to converge.
    const std::size_t quorum = opts.training_seeds.size() / 2 + 1;
    ordering.passed = base.runs >= quorum && reg.runs >= quorum &&
                      reg.ranks[p] < base.ranks[p] && reg.active_units < base.active_units;
    ordering.failures = ordering.passed ? 0 : 1;
    if (!ordering.passed) ordering.failing_seed = opts.training_seeds.front();
    ordering.detail = "median rank " + format_double(base.ranks[p]) + " -> " +
                      format_double(reg.ranks[p]) + ", active units " +
                      format_double(base.active_units) + " -> " + format_double(reg.active_units) +
                      ", converged runs " + std::to_string(base.runs) + " and " +
                      std::to_string(reg.runs) + " of " + std::to_string(opts.training_seeds.size());
    report.checks.push_back(std::move(ordering));
  }
  return report;
}

MultiOutputTask make_multi_output_task(const BottleneckSpec& spec, std::uint64_t seed) {
  const auto& ts = spec.ts;
  std::mt19937_64 teacher_rng(derive_seed(seed, kTeacher));
  const Matrix w = gaussian(ts.teacher_neurons, ts.d_in, ts.teacher_init_std, teacher_rng);
  const Matrix readout = gaussian(spec.output_dim, ts.teacher_neurons, ts.teacher_init_std,
                                  teacher_rng);
  auto label = [&](Matrix inputs) {
    Matrix targets(inputs.rows(), spec.output_dim);
    for (std::size_t i = 0; i < inputs.rows(); ++i) {
      nets::Vector hidden = linalg::matvec(w, inputs.row(i));
      for (double& v : hidden) v = nets::activate(ts.activation, v);
      const nets::Vector y = linalg::matvec(readout, hidden);
      std::copy(y.begin(), y.end(), targets.row(i).begin());
    }
    return Dataset{std::move(inputs), std::move(targets)};
  };
  std::mt19937_64 train_rng(derive_seed(seed, kTrainInputs));
  std::mt19937_64 test_rng(derive_seed(seed, kTestInputs));
  MultiOutputTask task;
  task.train = label(gaussian(ts.n_train, ts.d_in, ts.input_std, train_rng));
  task.test = label(gaussian(ts.n_test, ts.d_in, ts.input_std, test_rng));
  return task;
}

nets::Mlp make_student_mlp(const BottleneckSpec& spec, std::optional<std::size_t> h,
                           std::uint64_t seed) {
  const auto& ts = spec.ts;
  const double s = ts.student_init_std;
  std::mt19937_64 rng(derive_seed(seed, kStudent));
  nets::Mlp net;
  nets::Vector hidden_bias(ts.student_neurons, 0.0);
  if (ts.student_bias_init_std > 0.0) {
    std::normal_distribution<double> dist(0.0, ts.student_bias_init_std);
    for (double& b : hidden_bias) b = dist(rng);
  }
  net.layers.push_back({gaussian(ts.student_neurons, ts.d_in, s, rng), std::move(hidden_bias),
                        ts.activation});
  if (h) {
    if (*h < 1) throw std::invalid_argument("bottleneck inner dimension must be >= 1");
    nets::Bottleneck bn{gaussian(ts.student_neurons, *h, s, rng),
                        gaussian(*h, spec.output_dim, s, rng)};
    net.layers.push_back({Matrix(), nets::Vector(spec.output_dim, 0.0), nets::Activation::identity});
    net.bottleneck = std::move(bn);
  } else {
    net.layers.push_back({gaussian(spec.output_dim, ts.student_neurons, s, rng),
                          nets::Vector(spec.output_dim, 0.0), nets::Activation::identity});
  }
  net.validate();
  return net;
}

BottleneckResult run_bottleneck_ablation(const BottleneckSpec& spec) {
  spec.ts.validate();
  spec.optim.validate();
  if (spec.seeds.empty()) throw std::invalid_argument("bottleneck ablation: no seeds");
  for (std::size_t h : spec.h_grid)
    if (h < 1) throw std::invalid_argument("bottleneck ablation: h values must be >= 1");

  struct Cell {
    std::string variant;
    std::optional<std::size_t> h;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (std::uint64_t seed : spec.seeds) {
    cells.push_back({"baseline", std::nullopt, seed});
    for (std::size_t h : spec.h_grid) cells.push_back({"bottleneck", h, seed});
    cells.push_back({"sam", std::nullopt, seed});
  }

  BottleneckResult out;
  out.rows.resize(cells.size());
  DiagnosticsConfig diag;
  diag.thresholds = {spec.rank_threshold};
  diag.primary_threshold = spec.rank_threshold;

  parallel_for(cells.size(), spec.jobs, [&](std::size_t i) {
    const Cell& cell = cells[i];
    const MultiOutputTask task = make_multi_output_task(spec, cell.seed);
    optim::OptimConfig cfg = spec.optim;
    cfg.seed = cell.seed;
    optim::Schedule schedule;
    if (cell.variant == "sam") {
      schedule.method = optim::Method::sam;
      schedule.sam.rho = spec.sam_rho;
      schedule.sam.active_fraction = spec.active_fraction;
    }
    auto result = optim::train(make_student_mlp(spec, cell.h, cell.seed), task.train, cfg, schedule);
    BottleneckRow& row = out.rows[i];
    row.variant = cell.variant;
    row.h = cell.h.value_or(0);
    row.seed = cell.seed;
    row.diverged = result.diverged;
    if (!result.diverged) {
      const std::size_t last = result.net.layers.size() - 1;
      const LogRecord rec = measure(result.net, task.train, task.test, diag, result.steps_run, last);
      row.train_loss = rec.train_loss;
      row.test_loss = rec.test_loss;
      row.rank = rec.ranks.front();
    } else {
      row.train_loss = row.test_loss = std::nan("");
    }
  });
  return out;
}

}  // namespace samrank::experiments

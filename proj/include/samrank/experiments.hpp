#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "samrank/diagnostics.hpp"
#include "samrank/nets.hpp"
#include "samrank/optim.hpp"

namespace samrank::experiments {

struct TeacherStudentSpec {
  std::size_t d_in = 3;
  std::size_t teacher_neurons = 3;
  std::size_t student_neurons = 100;
  std::size_t n_train = 20;
  std::size_t n_test = 1000;
  double teacher_init_std = 1.0;
  double student_init_std = 0.3;
  // Std of the i.i.d. Gaussian inputs. At 1.0 the initial curvature of a
  // 100-unit student exceeds the lr=0.1 stability limit and SGD blows up in
  // the first few dozen steps, so the default is shrunk.
  double input_std = 0.7;
  // Std of the Gaussian hidden-bias init. Zero-initialized biases leave most
  // ReLUs alive through training even under large rho.
  double student_bias_init_std = 0.3;
  nets::Activation activation = nets::Activation::relu;
  bool student_biases = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TeacherStudent {
  nets::TwoLayerNet teacher;
  nets::Dataset train;
  nets::Dataset test;
};

/// Gaussian teacher (bias-free) with i.i.d. N(0, input_std^2) inputs and
/// noise-free targets. Everything is a function of spec.seed.
TeacherStudent make_teacher_student(const TeacherStudentSpec& spec);

/// Student with Gaussian weights of std student_init_std. Hidden biases are
/// N(0, student_bias_init_std^2), the output bias starts at zero.
nets::TwoLayerNet make_student(const TeacherStudentSpec& spec, std::uint64_t seed);

/// Derives independent 64-bit streams from one seed (splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Which diagnostics to compute at each checkpoint.
struct DiagnosticsConfig {
  std::vector<double> thresholds{0.95, 0.99, 0.999, 0.9999};
  bool center = true;
  /// Threshold used for medians and acceptance bands.
  double primary_threshold = 0.9999;
  /// k for the k-NN probe; 0 disables it. Labels are the sign of the target.
  std::size_t knn_k = 0;
  std::size_t cadence = 0;  // 0 logs only the final step
  std::size_t primary_index() const;
};

struct LogRecord {
  std::size_t step = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  std::vector<std::size_t> ranks;
  std::size_t active_units = 0;
  double weight_norm = 0.0;
  std::optional<double> knn_error;
};

struct TrainLog {
  std::vector<double> thresholds;
  std::vector<LogRecord> records;  // strictly increasing step
};

template <class Net>
LogRecord measure(const Net& net, const nets::Dataset& train, const nets::Dataset& test,
                  const DiagnosticsConfig& diag, std::size_t step, std::size_t block = 0);

struct RunResult {
  nets::TwoLayerNet net;
  TrainLog log;
  bool diverged = false;
  std::size_t steps_run = 0;
};

/// Trains a fresh student on the teacher-student task. `optim.seed` drives
/// batch sampling; the student init comes from a stream of ts.seed.
RunResult run_teacher_student(const TeacherStudentSpec& ts, const optim::OptimConfig& optim,
                              const optim::Schedule& schedule, const DiagnosticsConfig& diag);

struct SweepSpec {
  std::vector<double> rho_grid{0.0, 0.05, 0.1, 0.2, 0.4, 0.6};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  optim::Method method = optim::Method::sam;
  optim::OptimConfig optim;   // seed is overridden per cell
  double active_fraction = 0.5;
  DiagnosticsConfig diag;
  std::size_t jobs = 1;

  /// Throws unless the grid holds 0 and a value >= 0.4. Pass `strict=false`
  /// to only check basic validity (non-empty, non-negative).
  void validate(bool strict = true) const;
};

struct SweepRow {
  double rho = 0.0;
  std::uint64_t seed = 0;
  bool diverged = false;
  std::size_t steps_run = 0;
  LogRecord final;
  TrainLog log;
};

struct SweepMedian {
  double rho = 0.0;
  std::size_t runs = 0;  // non-diverged runs entering the median
  double train_loss = 0.0;
  double test_loss = 0.0;
  std::vector<double> ranks;
  double active_units = 0.0;
  double weight_norm = 0.0;
};

struct SweepResult {
  std::vector<double> thresholds;
  std::vector<SweepRow> rows;       // ordered by (rho index, seed index)
  std::vector<SweepMedian> medians; // ordered as rho_grid
};

/// Each (rho, seed) cell uses ts with ts.seed = seed for data and init, and
/// the same seed for batch sampling.
SweepResult run_sweep(const SweepSpec& sweep, const TeacherStudentSpec& ts);

double median(std::vector<double> values);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::size_t trials = 0;
  std::size_t failures = 0;
  std::string detail;
  std::optional<std::uint64_t> failing_seed;
};

struct DecompositionOptions {
  std::size_t trials = 1000;
  std::uint64_t seed = 0;
  /// Number of tanh nets for the rho-halving check.
  std::size_t scaling_nets = 100;
  double scaling_rho = 0.1;
  /// Short gradient-norm-regularized training comparison; 0 steps skips it.
  std::size_t training_steps = 60000;
  std::vector<std::uint64_t> training_seeds{0, 1, 2};
  double training_rho = 0.1;
  /// Test hook: negate the reported regularization component.
  bool flip_regularization_sign = false;
};

struct DecompositionReport {
  std::vector<CheckResult> checks;
  bool all_passed() const;
};

DecompositionReport run_decomposition_battery(const DecompositionOptions& opts);

/// Relative discrepancy ratio ||sam - gradreg||(rho) / ||sam - gradreg||(rho/2)
/// for one net and example.
double first_order_ratio(const nets::TwoLayerNet& net, std::span<const double> x, double y,
                         double lr, double rho);

struct BottleneckSpec {
  TeacherStudentSpec ts;
  std::size_t output_dim = 8;
  std::vector<std::size_t> h_grid{1, 2, 3, 8};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  // The 8-output squared loss is much steeper than the scalar task, so the
  // scalar task's lr=0.1 diverges here.
  optim::OptimConfig optim{.learning_rate = 0.01, .steps = 200000};
  double sam_rho = 0.2;
  double active_fraction = 0.5;
  double rank_threshold = 0.9999;
  std::size_t jobs = 1;
};

struct BottleneckRow {
  std::string variant;  // "baseline", "bottleneck" or "sam"
  std::size_t h = 0;    // inner dimension; 0 for unfactorized variants
  std::uint64_t seed = 0;
  bool diverged = false;
  double train_loss = 0.0;
  double test_loss = 0.0;
  std::size_t rank = 0;  // last-layer output rank on the training set
};

struct BottleneckResult {
  std::vector<BottleneckRow> rows;
};

/// Multi-output teacher y = A relu(W x) with A of shape output_dim x
/// teacher_neurons, and a one-hidden-layer student Mlp whose last (linear)
/// layer is either dense or factorized with inner dimension h.
struct MultiOutputTask {
  nets::Dataset train;
  nets::Dataset test;
};
MultiOutputTask make_multi_output_task(const BottleneckSpec& spec, std::uint64_t seed);
nets::Mlp make_student_mlp(const BottleneckSpec& spec, std::optional<std::size_t> h,
                           std::uint64_t seed);

BottleneckResult run_bottleneck_ablation(const BottleneckSpec& spec);

}  // namespace samrank::experiments

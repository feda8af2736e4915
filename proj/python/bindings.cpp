#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "samrank/config.hpp"
#include "samrank/diagnostics.hpp"
#include "samrank/experiments.hpp"
#include "samrank/io.hpp"
#include "samrank/nets.hpp"
#include "samrank/optim.hpp"

namespace py = pybind11;
using samrank::linalg::Matrix;
using samrank::nets::TwoLayerNet;
namespace ex = samrank::experiments;
namespace optim = samrank::optim;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array, got " + std::to_string(a.ndim()) + "-D");
  const auto* p = a.data();
  return Matrix(a.shape(0), a.shape(1), std::vector<double>(p, p + a.size()));
}

Array to_array(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

std::vector<double> to_vector(const Array& a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-D array");
  return {a.data(), a.data() + a.size()};
}

samrank::config::RunConfig make_config(const std::map<std::string, std::string>& settings) {
  samrank::config::RunConfig cfg;
  for (const auto& [key, value] : settings) samrank::config::set_value(cfg, key, value);
  cfg.ts.validate();
  cfg.optim.validate();
  cfg.sam.validate();
  return cfg;
}

py::dict record_dict(const ex::LogRecord& r) {
  py::dict d;
  d["step"] = r.step;
  d["train_loss"] = r.train_loss;
  d["test_loss"] = r.test_loss;
  d["ranks"] = r.ranks;
  d["active_units"] = r.active_units;
  d["weight_norm"] = r.weight_norm;
  d["knn_error"] = r.knn_error ? py::cast(*r.knn_error) : py::none();
  return d;
}

samrank::nets::Dataset single_example(const TwoLayerNet& net, const Array& x, double y) {
  const auto xv = to_vector(x);
  if (xv.size() != net.input_dim()) throw py::value_error("input length does not match the net");
  return {Matrix(1, xv.size(), xv), Matrix(1, 1, std::vector<double>{y})};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Training, SAM updates and feature-rank diagnostics for small networks.";

  py::register_exception<samrank::config::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<samrank::io::FormatError>(m, "FormatError", PyExc_ValueError);

  py::class_<TwoLayerNet>(m, "TwoLayerNet")
      .def(py::init([](const Array& w, const Array& a, std::optional<Array> b1,
                       std::optional<double> b2, const std::string& activation) {
             TwoLayerNet net;
             net.w = to_matrix(w);
             net.a = to_vector(a);
             if (b1) net.b1 = to_vector(*b1);
             net.b2 = b2;
             net.act = samrank::nets::activation_from_string(activation);
             net.validate();
             return net;
           }),
           py::arg("w"), py::arg("a"), py::arg("b1") = py::none(), py::arg("b2") = py::none(),
           py::arg("activation") = "relu")
      .def_property_readonly("w", [](const TwoLayerNet& n) { return to_array(n.w); })
      .def_property_readonly("a", [](const TwoLayerNet& n) { return n.a; })
      .def_property_readonly("b1", [](const TwoLayerNet& n) { return n.b1; })
      .def_property_readonly("b2", [](const TwoLayerNet& n) { return n.b2; })
      .def_property_readonly("activation",
                             [](const TwoLayerNet& n) { return std::string(samrank::nets::to_string(n.act)); })
      .def("forward", [](const TwoLayerNet& n, const Array& x) { return samrank::nets::forward(n, to_vector(x))[0]; })
      .def("loss",
           [](const TwoLayerNet& n, const Array& x, double y) {
             return samrank::nets::loss(n, to_vector(x), std::vector<double>{y});
           })
      .def("grad",
           [](const TwoLayerNet& n, const Array& x, double y) {
             return samrank::nets::grad(n, to_vector(x), std::vector<double>{y});
           },
           "Gradient of the loss in flattened parameter order (w, a, b1, b2).")
      .def("params", [](const TwoLayerNet& n) { return samrank::nets::flatten(n); });

  m.def(
      "sam_step",
      [](const TwoLayerNet& net, const Array& x, double y, double lr, double rho, double weight_decay) {
        const auto data = single_example(net, x, y);
        optim::OptimConfig cfg;
        cfg.learning_rate = lr;
        cfg.weight_decay = weight_decay;
        optim::SamConfig sam;
        sam.rho = rho;
        const std::vector<std::size_t> batch{0};
        auto step = optim::sam_step(net, data, batch, cfg, sam);
        return py::make_tuple(std::move(step.net), step.perturbation, step.outer_grad);
      },
      py::arg("net"), py::arg("x"), py::arg("y"), py::arg("lr"), py::arg("rho"),
      py::arg("weight_decay") = 0.0,
      "One SAM update on a single example. Returns (net, perturbation, outer_grad).");

  m.def(
      "gradreg_step",
      [](const TwoLayerNet& net, const Array& x, double y, double lr, double rho) {
        const auto data = single_example(net, x, y);
        optim::OptimConfig cfg;
        cfg.learning_rate = lr;
        const std::vector<std::size_t> batch{0};
        return optim::gradreg_step(net, data, batch, cfg, rho, optim::SamConfig{}.norm_epsilon);
      },
      py::arg("net"), py::arg("x"), py::arg("y"), py::arg("lr"), py::arg("rho"));

  m.def(
      "feature_rank",
      [](const Array& features, std::vector<double> thresholds, bool center) {
        const auto rep = samrank::diag::feature_rank(to_matrix(features), thresholds, center);
        py::dict d;
        d["thresholds"] = rep.thresholds;
        d["ranks"] = rep.ranks;
        d["eigenvalues"] = rep.spectrum.eigenvalues;
        d["total"] = rep.spectrum.total;
        return d;
      },
      py::arg("features"), py::arg("thresholds") = std::vector<double>{0.95, 0.99, 0.999, 0.9999},
      py::arg("center") = true);

  m.def(
      "active_units",
      [](const Array& features, std::optional<double> relative) {
        const Matrix f = to_matrix(features);
        if (relative) return samrank::diag::active_units(f, samrank::diag::RelativeThreshold{*relative}).active_units;
        return samrank::diag::active_units(f).active_units;
      },
      py::arg("features"), py::arg("relative") = py::none(),
      "Units with a positive activation somewhere, or at least `relative` times the largest one.");

  m.def("encode_matrix", [](const Array& a) { return py::bytes(samrank::io::encode_matrix(to_matrix(a))); });
  m.def("decode_matrix", [](const py::bytes& b) { return to_array(samrank::io::decode_matrix(std::string(b))); });
  m.def("write_matrix", [](const std::filesystem::path& p, const Array& a) {
    samrank::io::write_matrix_file(p, to_matrix(a));
  });
  m.def("read_matrix", [](const std::filesystem::path& p) { return to_array(samrank::io::read_matrix_file(p)); });

  m.def("derive_seed", &ex::derive_seed, py::arg("seed"), py::arg("stream"));
  m.def(
      "config_hash", [](const std::map<std::string, std::string>& settings) {
        return samrank::config::config_hash(make_config(settings));
      },
      py::arg("settings") = std::map<std::string, std::string>{});

  m.def(
      "train",
      [](const std::map<std::string, std::string>& settings) {
        const auto cfg = make_config(settings);
        optim::Schedule schedule;
        schedule.method = cfg.method;
        schedule.sam = cfg.sam;
        ex::RunResult run;
        {
          py::gil_scoped_release release;
          run = ex::run_teacher_student(cfg.ts, cfg.optim, schedule, cfg.diag);
        }
        py::list log;
        for (const auto& r : run.log.records) log.append(record_dict(r));
        py::dict d;
        d["diverged"] = run.diverged;
        d["steps_run"] = run.steps_run;
        d["thresholds"] = run.log.thresholds;
        d["log"] = log;
        d["net"] = run.net;
        d["config_hash"] = samrank::config::config_hash(cfg);
        return d;
      },
      py::arg("settings") = std::map<std::string, std::string>{},
      "Trains one student. `settings` uses the config-file keys, e.g. {'optim.steps': '1000'}.");

  m.def(
      "sweep",
      [](const std::map<std::string, std::string>& settings) {
        const auto cfg = make_config(settings);
        ex::SweepSpec spec;
        spec.rho_grid = cfg.rho_grid;
        spec.seeds = cfg.seeds;
        spec.method = cfg.method;
        spec.optim = cfg.optim;
        spec.active_fraction = cfg.sam.active_fraction;
        spec.diag = cfg.diag;
        spec.jobs = cfg.jobs;
        spec.validate(false);
        ex::SweepResult res;
        {
          py::gil_scoped_release release;
          res = ex::run_sweep(spec, cfg.ts);
        }
        py::list medians;
        for (const auto& md : res.medians) {
          py::dict d;
          d["rho"] = md.rho;
          d["runs"] = md.runs;
          d["train_loss"] = md.train_loss;
          d["test_loss"] = md.test_loss;
          d["ranks"] = md.ranks;
          d["active_units"] = md.active_units;
          d["weight_norm"] = md.weight_norm;
          medians.append(d);
        }
        py::list rows;
        for (const auto& r : res.rows) {
          py::dict d = record_dict(r.final);
          d["rho"] = r.rho;
          d["seed"] = r.seed;
          d["diverged"] = r.diverged;
          rows.append(d);
        }
        py::dict out;
        out["thresholds"] = res.thresholds;
        out["medians"] = medians;
        out["rows"] = rows;
        return out;
      },
      py::arg("settings") = std::map<std::string, std::string>{});

  m.def(
      "run_checks",
      [](std::size_t trials, std::uint64_t seed, std::size_t training_steps) {
        ex::DecompositionOptions opts;
        opts.trials = trials;
        opts.seed = seed;
        opts.training_steps = training_steps;
        ex::DecompositionReport rep;
        {
          py::gil_scoped_release release;
          rep = ex::run_decomposition_battery(opts);
        }
        py::list out;
        for (const auto& c : rep.checks) {
          py::dict d;
          d["name"] = c.name;
          d["passed"] = c.passed;
          d["trials"] = c.trials;
          d["failures"] = c.failures;
          d["detail"] = c.detail;
          out.append(d);
        }
        return out;
      },
      py::arg("trials") = 1000, py::arg("seed") = 0, py::arg("training_steps") = 0,
      "Runs the SAM step-decomposition checks used by the `check` command.");
}

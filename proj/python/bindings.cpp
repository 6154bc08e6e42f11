/*
 * Copyright 2026 The coopsgd Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>

#include "coopsgd/engine.hpp"
#include "coopsgd/error.hpp"
#include "coopsgd/experiment.hpp"
#include "coopsgd/mixing.hpp"
#include "coopsgd/theory.hpp"
#include "coopsgd/timeline.hpp"

namespace py = pybind11;
using namespace coopsgd;

namespace {

// JSON crosses the boundary as text; the Python side wraps it with json.loads.
std::string RunSpec(const std::string& spec_json, bool write_files) {
  const ExperimentSpec spec = SpecFromJson(nlohmann::json::parse(spec_json));
  ExperimentResult result = RunExperiment(spec, write_files);
  nlohmann::json out = result.summary;
  out["exit_code"] = result.exit_code;
  return out.dump();
}

std::string ValidateSpecText(const std::string& spec_json) {
  return ToJson(SpecFromJson(nlohmann::json::parse(spec_json))).dump();
}

py::dict TraceToDict(const RunTrace& trace) {
  std::vector<long> k;
  std::vector<double> loss, grad, net, clock;
  for (const TraceRecord& r : trace.records) {
    k.push_back(r.k);
    loss.push_back(r.loss);
    grad.push_back(r.grad_norm_sq);
    net.push_back(r.network_error);
    clock.push_back(r.wall_clock_s);
  }
  py::dict d;
  d["k"] = k;
  d["loss"] = loss;
  d["grad_norm_sq"] = grad;
  d["network_error"] = net;
  d["wall_clock_s"] = clock;
  d["diverged"] = trace.diverged;
  d["mean_grad_norm_sq"] = trace.mean_grad_norm_sq;
  d["max_recursion_defect"] = trace.max_recursion_defect;
  return d;
}

py::dict SimulateQuadratic(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                           double sigma_sq, double beta,
                           const Eigen::MatrixXd& w, int workers, int tau,
                           double eta, long iterations, std::uint64_t seed,
                           const std::string& rule) {
  AlgorithmConfig config;
  config.workers = workers;
  config.auxiliaries = static_cast<int>(w.rows()) - workers;
  config.tau = tau;
  config.mixing = MixingMatrix(w);
  config.eta = eta;
  config.iterations = iterations;
  config.seed = seed;
  if (rule == "post") {
    config.rule = UpdateRule::kPostMultiply;
  } else if (rule == "pre") {
    config.rule = UpdateRule::kPreMultiply;
  } else {
    throw ConfigError("rule must be \"post\" or \"pre\"");
  }
  auto oracle = std::make_shared<QuadraticProblem>(a, b, sigma_sq, beta);
  return TraceToDict(Run(config, oracle));
}

py::dict Stationarity(double f1_minus_finf, double lipschitz, double sigma_sq,
                  double beta, int workers, int auxiliaries, int tau,
                  double zeta, double eta, long iterations) {
  theory::BoundInputs in;
  in.f1_minus_finf = f1_minus_finf;
  in.lipschitz = lipschitz;
  in.sigma_sq = sigma_sq;
  in.beta = beta;
  in.workers = workers;
  in.auxiliaries = auxiliaries;
  in.tau = tau;
  in.zeta = zeta;
  in.eta = eta;
  in.iterations = iterations;
  const theory::BoundReport r = theory::StationarityBound(in);
  py::dict d;
  d["lr_lhs"] = r.lr.lhs;
  d["lr_ok"] = r.lr.ok;
  d["bound"] = r.bound;
  d["floor"] = r.floor;
  d["opt_term"] = r.terms.opt_term;
  d["stat_term"] = r.terms.stat_term;
  d["network_term"] = r.terms.network_term;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Cooperative SGD simulator core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError",
                                          PyExc_ValueError);
  py::register_exception<InvalidDimension>(m, "InvalidDimension",
                                           PyExc_ValueError);

  m.def("spectral_gap", [](const Eigen::MatrixXd& w) { return SpectralGap(w); },
        py::arg("w"));
  m.def("power_deviation_norm",
        [](const Eigen::MatrixXd& w, int j) {
          return PowerDeviationNorm(MixingMatrix(w), j);
        },
        py::arg("w"), py::arg("j"));
  m.def("fully_connected", [](int n) { return MakeFullyConnected(n).entries(); });
  m.def("ring", [](int m) { return MakeRing(m).entries(); });
  m.def("uniform_zeta",
        [](int n, double zeta) { return MakeUniformZeta(n, zeta).entries(); });
  m.def("easgd_matrix",
        [](int m, double alpha) { return MakeEasgd(m, alpha).entries(); });
  m.def("generalized_elastic",
        [](const Eigen::MatrixXd& w, double alpha) {
          return MakeGeneralizedElastic(MixingMatrix(w), alpha).entries();
        });
  m.def("best_easgd_alpha", [](int m) {
    const AlphaChoice c = BestEasgdAlpha(m);
    return py::make_tuple(c.alpha, c.zeta);
  });
  m.def("zeta_threshold", &theory::ZetaThreshold, py::arg("tau"));
  m.def("stationarity_bound", &Stationarity, py::arg("f1_minus_finf"),
        py::arg("lipschitz"), py::arg("sigma_sq"), py::arg("beta") = 0.0,
        py::arg("workers"), py::arg("auxiliaries") = 0, py::arg("tau") = 1,
        py::arg("zeta") = 0.0, py::arg("eta"), py::arg("iterations"));
  m.def("simulate_quadratic", &SimulateQuadratic, py::arg("a"), py::arg("b"),
        py::arg("sigma_sq"), py::arg("beta"), py::arg("w"), py::arg("workers"),
        py::arg("tau"), py::arg("eta"), py::arg("iterations"), py::arg("seed"),
        py::arg("rule") = "post");
  m.def("run_experiment_json", &RunSpec, py::arg("spec_json"),
        py::arg("write_files") = false,
        py::call_guard<py::gil_scoped_release>());
  m.def("validate_spec_json", &ValidateSpecText, py::arg("spec_json"));
  m.def("preset_names", &PresetNames);
}

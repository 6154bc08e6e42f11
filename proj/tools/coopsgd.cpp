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

// Command-line front end: run / preset / bounds / validate.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "coopsgd/error.hpp"
#include "coopsgd/experiment.hpp"
#include "coopsgd/mixing.hpp"
#include "coopsgd/theory.hpp"

namespace {

using nlohmann::json;

json LoadJson(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw coopsgd::ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw coopsgd::ConfigError(path + ": " + e.what());
  }
}

struct BoundFlags {
  double delta = 1.0;
  double lipschitz = 1.0;
  double sigma_sq = 1.0;
  double beta = 0.0;
  int m = 1;
  int v = 0;
  std::optional<int> tau;
  double zeta = 0.0;
  std::optional<double> eta;
  long iterations = 1000;
  bool best_easgd_alpha = false;
};

int Bounds(const BoundFlags& f) {
  if (!(f.zeta >= 0.0 && f.zeta < 1.0)) {
    std::cerr << "error: zeta must lie in [0, 1); got " << f.zeta << "\n";
    return coopsgd::kExitInvalidInput;
  }
  if (f.m < 1 || f.v < 0 || f.iterations < 1 || f.lipschitz <= 0.0 ||
      f.sigma_sq < 0.0 || f.beta < 0.0 || (f.tau && *f.tau < 1) ||
      (f.eta && *f.eta <= 0.0)) {
    std::cerr << "error: need m >= 1, v >= 0, tau >= 1, K >= 1, L > 0, "
                 "sigma_sq >= 0, beta >= 0, eta > 0\n";
    return coopsgd::kExitInvalidInput;
  }
  namespace th = coopsgd::theory;
  const int tau = f.tau.value_or(1);
  const th::FiniteHorizon horizon =
      th::FiniteHorizonBound(f.delta, f.lipschitz, f.sigma_sq, f.m, f.v, tau,
                          f.zeta, f.iterations);
  th::BoundInputs in;
  in.f1_minus_finf = f.delta;
  in.lipschitz = f.lipschitz;
  in.sigma_sq = f.sigma_sq;
  in.beta = f.beta;
  in.workers = f.m;
  in.auxiliaries = f.v;
  in.tau = tau;
  in.zeta = f.zeta;
  in.eta = f.eta.value_or(horizon.eta);
  in.iterations = f.iterations;

  json out = th::ToJson(th::StationarityBound(in));
  out["eta"] = in.eta;
  out["eta_tilde"] = in.eta_tilde();
  out["finite_horizon"] = {{"eta", horizon.eta},
                           {"bound", horizon.bound},
                           {"k_min", horizon.k_min},
                           {"k_min_tight", horizon.k_min_tight}};
  if (f.tau) out["zeta_threshold"] = th::ZetaThreshold(*f.tau);
  if (f.best_easgd_alpha) {
    const coopsgd::AlphaChoice best = coopsgd::BestEasgdAlpha(f.m);
    out["best_easgd_alpha"] = {{"alpha", best.alpha}, {"zeta", best.zeta}};
  }
  std::cout << out.dump(2) << "\n";
  return coopsgd::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cooperative SGD simulator and bound calculator"};
  app.require_subcommand(1);

  std::string run_path;
  std::string run_out;
  auto* run = app.add_subcommand("run", "Run an experiment spec");
  run->add_option("spec", run_path, "Experiment JSON")->required();
  run->add_option("--out", run_out, "Override the spec's output_dir");

  std::string preset_name;
  std::string preset_out;
  std::vector<std::uint64_t> preset_seeds;
  auto* preset = app.add_subcommand("preset", "Run a built-in experiment");
  preset->add_option("name", preset_name, "Preset name")
      ->required()
      ->check(CLI::IsMember(coopsgd::PresetNames()));
  preset->add_option("--out", preset_out, "Output directory")->required();
  preset->add_option("--seeds", preset_seeds, "Seed list (default 1..20)");

  BoundFlags flags;
  auto* bounds = app.add_subcommand("bounds", "Evaluate convergence bounds");
  bounds->add_option("--delta", flags.delta, "F(x_1) - F_inf");
  bounds->add_option("--L", flags.lipschitz, "Lipschitz constant");
  bounds->add_option("--sigma-sq", flags.sigma_sq, "Gradient variance bound");
  bounds->add_option("--beta", flags.beta, "Multiplicative variance factor");
  bounds->add_option("--m", flags.m, "Workers");
  bounds->add_option("--v", flags.v, "Auxiliary variables");
  bounds->add_option("--tau", flags.tau, "Communication period");
  bounds->add_option("--zeta", flags.zeta, "Spectral gap parameter");
  bounds->add_option("--eta", flags.eta,
                     "Worker learning rate (default: the finite-horizon choice)");
  bounds->add_option("--K", flags.iterations, "Iterations");
  bounds->add_flag("--best-easgd-alpha", flags.best_easgd_alpha,
                   "Report the optimal elastic coupling for m workers");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check an experiment spec");
  validate->add_option("spec", validate_path, "Experiment JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : coopsgd::kExitInvalidInput;
  }

  try {
    if (*run) {
      coopsgd::ExperimentSpec spec = coopsgd::SpecFromJson(LoadJson(run_path));
      if (!run_out.empty()) spec.output_dir = run_out;
      const coopsgd::ExperimentResult result = coopsgd::RunExperiment(spec);
      std::cout << result.summary.dump(2) << "\n";
      if (result.exit_code == coopsgd::kExitAllDiverged) {
        std::cerr << "error: every seed diverged\n";
      }
      return result.exit_code;
    }
    if (*preset) {
      if (preset_seeds.empty()) preset_seeds = coopsgd::DefaultPresetSeeds();
      const coopsgd::PresetResult result =
          coopsgd::RunPreset(preset_name, preset_seeds, preset_out);
      std::cout << result.summary.dump(2) << "\n";
      return coopsgd::kExitOk;
    }
    if (*bounds) return Bounds(flags);
    if (*validate) {
      const coopsgd::ExperimentSpec spec =
          coopsgd::SpecFromJson(LoadJson(validate_path));
      std::cout << coopsgd::ToJson(spec).dump(2) << "\n";
      return coopsgd::kExitOk;
    }
  } catch (const coopsgd::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return coopsgd::kExitInvalidInput;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return coopsgd::kExitInvalidInput;
  }
  return coopsgd::kExitOk;
}

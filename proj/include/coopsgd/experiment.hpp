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

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "coopsgd/engine.hpp"
#include "coopsgd/objectives.hpp"
#include "coopsgd/theory.hpp"
#include "coopsgd/timeline.hpp"

namespace coopsgd {

inline constexpr int kSpecVersion = 1;

/// Exit statuses shared by the library entry points and the command line.
enum ExitStatus : int {
  kExitOk = 0,
  kExitInvalidInput = 2,
  kExitAllDiverged = 3,
};

/// A fully resolved experiment. `problem` holds the canonical JSON of
/// `oracle`; `algorithm.seed` is ignored (each entry of `seeds` is one run).
struct ExperimentSpec {
  nlohmann::json problem;
  std::shared_ptr<const GradientOracle> oracle;
  AlgorithmConfig algorithm;
  DelayModel delay;
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "out";

  /// Compares everything except the oracle pointer.
  bool operator==(const ExperimentSpec& other) const;
};

/// Parses a mixing matrix given either explicitly ({"n", "entries"[, "zeta"]})
/// or as a topology descriptor:
///   {"topology": "full" | "ring" | "identity"}
///   {"topology": "uniform", "zeta": z}
///   {"topology": "easgd", "alpha": a}            (n - 1 workers + 1 anchor)
///   {"topology": "elastic", "base": <mixing>, "alpha": a}
///   {"topology": "hierarchical", "groups": [...], "alpha": a,
///    "inter": <mixing>}
/// An optional "n" overrides `default_size` for full/ring/identity/uniform.
MixingMatrix MixingFromDescriptor(const nlohmann::json& j, int default_size);

/// {"workers", "auxiliaries", "tau", "eta", "iterations", "rule",
///  "mixing", "x0"}; "rule" is "post" or "pre".
nlohmann::json ToJson(const AlgorithmConfig& config);
AlgorithmConfig AlgorithmFromJson(const nlohmann::json& j);

/// Version-1 schema: {"version", "problem", "algorithm", "delay", "seeds",
/// "output_dir"}. Unknown keys anywhere are ConfigErrors naming the key.
ExperimentSpec SpecFromJson(const nlohmann::json& j);
/// Mixing is written out explicitly, so the result re-parses to an equal
/// spec.
nlohmann::json ToJson(const ExperimentSpec& spec);

/// Throws (ConfigError / ValidationError / InvalidDimension) unless every
/// component is consistent. Mixing matrices with zeta >= 1 are allowed: such
/// runs are expected to drift or diverge and are reported, not refused.
void ValidateSpec(const ExperimentSpec& spec);

/// Bound inputs for a spec: F(x0) - F_inf and the oracle constants.
theory::BoundInputs BoundInputsFor(const ExperimentSpec& spec);

/// CSV with header k,loss,grad_norm_sq,network_error,wall_clock_s; numbers
/// printed with 17 significant digits so output is byte-stable.
std::string TraceCsv(const RunTrace& trace);

struct ExperimentResult {
  int exit_code = kExitOk;
  std::vector<RunTrace> traces;  // one per seed, in seed order
  RunTrace mean;
  std::vector<TimelineTrace> timelines;
  double long_run_floor = 0.0;       // final-20% mean of grad_norm_sq
  double long_run_worker_gap = 0.0;  // final-20% mean of worker_loss - F_inf
  nlohmann::json summary;
};

/// Runs every seed (concurrently), attaches wall-clock times and, when
/// `write_files` is set, writes trace_seed<S>.csv, trace_mean.csv and
/// summary.json into spec.output_dir.
ExperimentResult RunExperiment(const ExperimentSpec& spec,
                               bool write_files = true);

// Presets ------------------------------------------------------------------

struct PresetRun {
  std::string label;
  nlohmann::json params;
  ExperimentSpec spec;
  ExperimentResult result;
};

struct PresetResult {
  std::string name;
  std::vector<PresetRun> runs;
  nlohmann::json summary;
};

std::vector<std::string> PresetNames();
std::vector<std::uint64_t> DefaultPresetSeeds();  // 1..20

/// The experiments that make up a preset, each writing to out_dir/<label>.
std::vector<PresetRun> PresetSpecs(const std::string& name,
                                   const std::vector<std::uint64_t>& seeds,
                                   const std::filesystem::path& out_dir);

/// Runs a preset and writes out_dir/preset.json next to the per-run folders.
PresetResult RunPreset(const std::string& name,
                       const std::vector<std::uint64_t>& seeds,
                       const std::filesystem::path& out_dir,
                       bool write_files = true);

}  // namespace coopsgd

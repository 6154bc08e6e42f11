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

#include "coopsgd/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <limits>
#include <set>
#include <string_view>
#include <thread>

#include "coopsgd/error.hpp"

namespace coopsgd {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void RejectUnknownKeys(const json& j, std::initializer_list<std::string_view> allowed,
                       const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown field in " + where + ": " + key);
    }
  }
}

template <typename T>
T Required(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) {
    throw ConfigError(where + " is missing \"" + key + "\"");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": \"" + key + "\" has the wrong type");
  }
}

template <typename T>
T Optional(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  return Required<T>(j, key, where);
}

void WriteFileAtomically(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << content;
    if (!out) throw ConfigError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

json NullIfNotFinite(double x) { return std::isfinite(x) ? json(x) : json(); }

}  // namespace

// Mixing descriptors ---------------------------------------------------------

MixingMatrix MixingFromDescriptor(const json& j, int default_size) {
  if (!j.is_object()) throw ConfigError("mixing must be a JSON object");
  if (!j.contains("topology")) return MixingFromJson(j);
  const std::string where = "mixing";
  const auto topology = Required<std::string>(j, "topology", where);
  if (topology == "full" || topology == "ring" || topology == "identity") {
    RejectUnknownKeys(j, {"topology", "n"}, where);
    const int n = Optional<int>(j, "n", default_size, where);
    if (topology == "full") return MakeFullyConnected(n);
    if (topology == "ring") return MakeRing(n);
    return MixingMatrix::Identity(n);
  }
  if (topology == "uniform") {
    RejectUnknownKeys(j, {"topology", "n", "zeta"}, where);
    return MakeUniformZeta(Optional<int>(j, "n", default_size, where),
                           Required<double>(j, "zeta", where));
  }
  if (topology == "easgd") {
    RejectUnknownKeys(j, {"topology", "n", "alpha"}, where);
    const int n = Optional<int>(j, "n", default_size, where);
    return MakeEasgd(n - 1, Required<double>(j, "alpha", where));
  }
  if (topology == "elastic") {
    RejectUnknownKeys(j, {"topology", "base", "alpha"}, where);
    if (!j.contains("base")) throw ConfigError("elastic mixing needs \"base\"");
    const MixingMatrix base = MixingFromDescriptor(j.at("base"), default_size - 1);
    return MakeGeneralizedElastic(base, Required<double>(j, "alpha", where));
  }
  if (topology == "hierarchical") {
    RejectUnknownKeys(j, {"topology", "groups", "alpha", "inter"}, where);
    const auto groups = Required<std::vector<int>>(j, "groups", where);
    if (!j.contains("inter")) {
      throw ConfigError("hierarchical mixing needs \"inter\"");
    }
    const MixingMatrix inter =
        MixingFromDescriptor(j.at("inter"), static_cast<int>(groups.size()));
    return MakeHierarchical(groups, Required<double>(j, "alpha", where), inter);
  }
  throw ConfigError("unknown topology: " + topology);
}

// Algorithm configuration ----------------------------------------------------

json ToJson(const AlgorithmConfig& config) {
  return {{"workers", config.workers},
          {"auxiliaries", config.auxiliaries},
          {"tau", config.tau},
          {"eta", config.eta},
          {"iterations", config.iterations},
          {"rule", config.rule == UpdateRule::kPostMultiply ? "post" : "pre"},
          {"mixing", ToJson(config.mixing)},
          {"x0", std::vector<double>(config.x0.data(),
                                     config.x0.data() + config.x0.size())}};
}

AlgorithmConfig AlgorithmFromJson(const json& j) {
  const std::string where = "algorithm";
  RejectUnknownKeys(j, {"workers", "auxiliaries", "tau", "eta", "iterations",
                        "rule", "mixing", "x0"},
                    where);
  AlgorithmConfig config;
  config.workers = Required<int>(j, "workers", where);
  config.auxiliaries = Optional<int>(j, "auxiliaries", 0, where);
  config.tau = Optional<int>(j, "tau", 1, where);
  config.eta = Required<double>(j, "eta", where);
  config.iterations = Required<long>(j, "iterations", where);
  const auto rule = Optional<std::string>(j, "rule", "post", where);
  if (rule == "post") {
    config.rule = UpdateRule::kPostMultiply;
  } else if (rule == "pre") {
    config.rule = UpdateRule::kPreMultiply;
  } else {
    throw ConfigError("algorithm.rule must be \"post\" or \"pre\", got " + rule);
  }
  if (config.workers < 1 || config.auxiliaries < 0) {
    throw ConfigError("algorithm needs workers >= 1 and auxiliaries >= 0");
  }
  if (!j.contains("mixing")) throw ConfigError("algorithm is missing \"mixing\"");
  config.mixing =
      MixingFromDescriptor(j.at("mixing"), config.workers + config.auxiliaries);
  const auto x0 = Optional<std::vector<double>>(j, "x0", {}, where);
  config.x0 = Eigen::Map<const Eigen::VectorXd>(x0.data(),
                                                static_cast<Eigen::Index>(x0.size()));
  return config;
}

// Experiment spec ------------------------------------------------------------

bool ExperimentSpec::operator==(const ExperimentSpec& other) const {
  const AlgorithmConfig& a = algorithm;
  const AlgorithmConfig& b = other.algorithm;
  return problem == other.problem && a.workers == b.workers &&
         a.auxiliaries == b.auxiliaries && a.tau == b.tau &&
         a.mixing == b.mixing && a.eta == b.eta &&
         a.iterations == b.iterations && a.rule == b.rule &&
         a.x0.size() == b.x0.size() && a.x0 == b.x0 && delay == other.delay &&
         seeds == other.seeds && output_dir == other.output_dir;
}

ExperimentSpec SpecFromJson(const json& j) {
  const std::string where = "experiment";
  RejectUnknownKeys(j, {"version", "problem", "algorithm", "delay", "seeds",
                        "output_dir"},
                    where);
  const int version = Required<int>(j, "version", where);
  if (version != kSpecVersion) {
    throw ConfigError("unsupported spec version " + std::to_string(version));
  }
  if (!j.contains("problem")) throw ConfigError("experiment is missing \"problem\"");
  if (!j.contains("algorithm")) {
    throw ConfigError("experiment is missing \"algorithm\"");
  }
  ExperimentSpec spec;
  spec.oracle = OracleFromJson(j.at("problem"));
  spec.problem = spec.oracle->ToJson();
  spec.algorithm = AlgorithmFromJson(j.at("algorithm"));
  if (j.contains("delay")) spec.delay = DelayFromJson(j.at("delay"));
  if (!j.contains("seeds") || !j.at("seeds").is_array()) {
    throw ConfigError("experiment needs a \"seeds\" array");
  }
  for (const json& s : j.at("seeds")) {
    if (!s.is_number_integer() ||
        (!s.is_number_unsigned() && s.get<std::int64_t>() < 0)) {
      throw ConfigError("seeds must be nonnegative integers, got " + s.dump());
    }
    spec.seeds.push_back(s.get<std::uint64_t>());
  }
  spec.output_dir = Optional<std::string>(j, "output_dir", "out", where);
  ValidateSpec(spec);
  return spec;
}

json ToJson(const ExperimentSpec& spec) {
  return {{"version", kSpecVersion},
          {"problem", spec.problem},
          {"algorithm", ToJson(spec.algorithm)},
          {"delay", ToJson(spec.delay)},
          {"seeds", spec.seeds},
          {"output_dir", spec.output_dir}};
}

void ValidateSpec(const ExperimentSpec& spec) {
  if (!spec.oracle) throw ConfigError("experiment has no problem");
  ValidateConfig(spec.algorithm);
  ValidateDelay(spec.delay);
  if (spec.algorithm.x0.size() != 0 &&
      spec.algorithm.x0.size() != spec.oracle->dimension()) {
    throw InvalidDimension("x0 has " + std::to_string(spec.algorithm.x0.size()) +
                           " entries, the problem has dimension " +
                           std::to_string(spec.oracle->dimension()));
  }
  if (spec.seeds.empty()) throw ConfigError("seeds must be non-empty");
  const std::set<std::uint64_t> distinct(spec.seeds.begin(), spec.seeds.end());
  if (distinct.size() != spec.seeds.size()) {
    throw ConfigError("seeds must be distinct");
  }
}

theory::BoundInputs BoundInputsFor(const ExperimentSpec& spec) {
  const AlgorithmConfig& a = spec.algorithm;
  const Eigen::VectorXd x0 = a.x0.size() == 0
                                 ? Eigen::VectorXd::Zero(spec.oracle->dimension())
                                 : a.x0;
  theory::BoundInputs in;
  in.f1_minus_finf = spec.oracle->Value(x0) - spec.oracle->f_inf();
  in.lipschitz = spec.oracle->lipschitz();
  in.sigma_sq = spec.oracle->sigma_sq();
  in.beta = spec.oracle->beta();
  in.workers = a.workers;
  in.auxiliaries = a.auxiliaries;
  in.tau = a.tau;
  in.zeta = a.mixing.zeta();
  in.eta = a.eta;
  in.iterations = a.iterations;
  return in;
}

std::string TraceCsv(const RunTrace& trace) {
  std::string out = "k,loss,grad_norm_sq,network_error,wall_clock_s\n";
  char line[160];
  for (const TraceRecord& r : trace.records) {
    std::snprintf(line, sizeof line, "%ld,%.17g,%.17g,%.17g,%.17g\n", r.k,
                  r.loss, r.grad_norm_sq, r.network_error, r.wall_clock_s);
    out += line;
  }
  return out;
}

ExperimentResult RunExperiment(const ExperimentSpec& spec, bool write_files) {
  ValidateSpec(spec);
  const std::size_t n = spec.seeds.size();
  ExperimentResult result;
  result.traces.resize(n);
  result.timelines.resize(n);

  // Seeds are independent; results land in seed order regardless of which
  // thread finishes first.
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        AlgorithmConfig config = spec.algorithm;
        config.seed = spec.seeds[i];
        result.traces[i] = Run(config, spec.oracle);
        result.timelines[i] =
            SimulateTimeline(config.iterations, config.tau, config.mixing,
                             config.workers, spec.delay, config.seed);
        AttachTimeline(result.traces[i], result.timelines[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(
      n, std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  result.mean = AverageTraces(result.traces);
  const bool all_diverged = result.mean.diverged;
  result.exit_code = all_diverged ? kExitAllDiverged : kExitOk;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  result.long_run_floor =
      all_diverged ? nan : LongRunMean(result.mean, &TraceRecord::grad_norm_sq);
  result.long_run_worker_gap =
      all_diverged ? nan
                   : LongRunMean(result.mean, &TraceRecord::worker_loss) -
                         spec.oracle->f_inf();

  json diverged_seeds = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    if (result.traces[i].diverged) diverged_seeds.push_back(spec.seeds[i]);
  }
  double total_time = 0.0, idle = 0.0, comm = 0.0;
  for (const TimelineTrace& t : result.timelines) {
    total_time += t.total_time();
    idle += t.mean_idle_fraction();
    comm += t.comm_fraction();
  }
  const double inv = 1.0 / static_cast<double>(n);

  json bounds;
  try {
    bounds = theory::ToJson(theory::StationarityBound(BoundInputsFor(spec)));
  } catch (const ValidationError& e) {
    bounds = {{"error", e.what()}};
  }

  result.summary = {
      {"mean_grad_norm_sq", NullIfNotFinite(result.mean.mean_grad_norm_sq)},
      {"final_loss", NullIfNotFinite(result.mean.final_loss)},
      {"diverged", all_diverged},
      {"diverged_seeds", diverged_seeds},
      {"config_echo", ToJson(spec)},
      {"bounds", bounds},
      {"timeline",
       {{"total_time_s", total_time * inv},
        {"idle_fraction", idle * inv},
        {"comm_fraction", comm * inv}}},
      {"long_run_floor", NullIfNotFinite(result.long_run_floor)},
      {"long_run_worker_loss_gap", NullIfNotFinite(result.long_run_worker_gap)},
      {"mixing_valid", spec.algorithm.mixing.valid()},
      {"max_recursion_defect", result.mean.max_recursion_defect}};

  if (write_files) {
    const fs::path dir(spec.output_dir);
    fs::create_directories(dir);
    for (std::size_t i = 0; i < n; ++i) {
      WriteFileAtomically(dir / ("trace_seed" + std::to_string(spec.seeds[i]) + ".csv"),
                          TraceCsv(result.traces[i]));
    }
    WriteFileAtomically(dir / "trace_mean.csv", TraceCsv(result.mean));
    WriteFileAtomically(dir / "summary.json", result.summary.dump(2) + "\n");
  }
  return result;
}

// Presets --------------------------------------------------------------------

namespace {

// Shared synthetic objective: F(x) = 1/2 x^T A x - b^T x on R^10 with
// A = diag(0.1, 0.2, ..., 1.0) and minimizer at the all-ones vector.
json PresetQuadratic(double sigma_sq, double beta) {
  constexpr int kDim = 10;
  json a = json::array();
  json b = json::array();
  for (int i = 0; i < kDim; ++i) {
    json row = json::array();
    const double lambda = 0.1 * (i + 1);
    for (int k = 0; k < kDim; ++k) row.push_back(i == k ? lambda : 0.0);
    a.push_back(row);
    b.push_back(lambda);
  }
  return {{"type", "quadratic"}, {"A", a}, {"b", b},
          {"sigma_sq", sigma_sq}, {"beta", beta}};
}

ExperimentSpec MakeSpec(const json& problem, AlgorithmConfig algorithm,
                        const DelayModel& delay,
                        const std::vector<std::uint64_t>& seeds,
                        const fs::path& dir) {
  ExperimentSpec spec;
  spec.oracle = OracleFromJson(problem);
  spec.problem = spec.oracle->ToJson();
  spec.algorithm = std::move(algorithm);
  spec.delay = delay;
  spec.seeds = seeds;
  spec.output_dir = dir.string();
  ValidateSpec(spec);
  return spec;
}

std::string Label(const char* format, double a, double b) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, a, b);
  return buf;
}

// floor-sweep: the multiplicative noise term (beta > 0) makes the averaged
// model feel the spread of the worker models; with purely additive noise the
// averaged model of a quadratic evolves independently of tau and W.
constexpr int kFloorWorkers = 4;
constexpr double kFloorEta = 0.2;
constexpr double kFloorBeta = 4.0;
constexpr long kFloorIterations = 6400;
constexpr int kFloorTaus[] = {1, 2, 8, 32};
constexpr double kFloorZetas[] = {0.0, 1.0 / 3.0, 0.8};

constexpr int kEasgdWorkers = 8;
constexpr double kEasgdEta = 0.1;
constexpr long kEasgdIterations = 20000;
constexpr double kEasgdAlphas[] = {0.05, 0.1125, 0.2, 0.23};

constexpr int kHybridWorkers = 7;
constexpr double kHybridZeta = 0.75;
constexpr double kHybridEta = 0.2;
constexpr double kHybridBeta = 4.0;
constexpr long kHybridIterations = 6000;

}  // namespace

std::vector<std::string> PresetNames() {
  return {"floor-sweep", "easgd-alpha-sweep", "hybrid-compare"};
}

std::vector<std::uint64_t> DefaultPresetSeeds() {
  std::vector<std::uint64_t> seeds(20);
  for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = i + 1;
  return seeds;
}

std::vector<PresetRun> PresetSpecs(const std::string& name,
                                   const std::vector<std::uint64_t>& seeds,
                                   const fs::path& out_dir) {
  std::vector<PresetRun> runs;
  DelayModel delay;
  delay.kind = ComputeKind::kConstant;
  delay.shift = 1.0;
  delay.latency = 1.0;
  delay.per_neighbor = 0.25;

  if (name == "floor-sweep") {
    const json problem = PresetQuadratic(1.0, kFloorBeta);
    for (double zeta : kFloorZetas) {
      for (int tau : kFloorTaus) {
        AlgorithmConfig a;
        a.workers = kFloorWorkers;
        a.tau = tau;
        a.mixing = MakeUniformZeta(kFloorWorkers, zeta);
        a.eta = kFloorEta;
        a.iterations = kFloorIterations;
        const std::string label = Label("tau%g_zeta%.4f", tau, zeta);
        runs.push_back({label, {{"tau", tau}, {"zeta", zeta}},
                        MakeSpec(problem, a, delay, seeds, out_dir / label),
                        {}});
      }
    }
  } else if (name == "easgd-alpha-sweep") {
    const json problem = PresetQuadratic(1.0, 0.0);
    for (double alpha : kEasgdAlphas) {
      AlgorithmConfig a;
      a.workers = kEasgdWorkers;
      a.auxiliaries = 1;
      a.mixing = MakeEasgd(kEasgdWorkers, alpha);
      a.eta = kEasgdEta;
      a.iterations = kEasgdIterations;
      const std::string label = Label("alpha%g", alpha, 0.0);
      runs.push_back({label, {{"alpha", alpha}},
                      MakeSpec(problem, a, delay, seeds, out_dir / label), {}});
    }
  } else if (name == "hybrid-compare") {
    const json problem = PresetQuadratic(1.0, kHybridBeta);
    DelayModel random = delay;
    random.kind = ComputeKind::kShiftedExponential;
    random.mean = 0.5;
    struct Variant {
      const char* label;
      int tau;
      double zeta;
    };
    for (const Variant& v : {Variant{"dpsgd", 1, kHybridZeta},
                             Variant{"pasgd_tau50", 50, 0.0},
                             Variant{"hybrid_tau15", 15, kHybridZeta}}) {
      AlgorithmConfig a;
      a.workers = kHybridWorkers;
      a.tau = v.tau;
      a.mixing = MakeUniformZeta(kHybridWorkers, v.zeta);
      a.eta = kHybridEta;
      a.iterations = kHybridIterations;
      runs.push_back({v.label, {{"tau", v.tau}, {"zeta", v.zeta}},
                      MakeSpec(problem, a, random, seeds, out_dir / v.label),
                      {}});
    }
  } else {
    throw ConfigError("unknown preset: " + name);
  }
  return runs;
}

PresetResult RunPreset(const std::string& name,
                       const std::vector<std::uint64_t>& seeds,
                       const fs::path& out_dir, bool write_files) {
  PresetResult preset;
  preset.name = name;
  preset.runs = PresetSpecs(name, seeds, out_dir);
  json runs = json::array();
  for (PresetRun& run : preset.runs) {
    run.result = RunExperiment(run.spec, write_files);
    json entry = run.params;
    entry["label"] = run.label;
    entry["diverged"] = run.result.mean.diverged;
    entry["long_run_floor"] = NullIfNotFinite(run.result.long_run_floor);
    entry["long_run_worker_loss_gap"] =
        NullIfNotFinite(run.result.long_run_worker_gap);
    entry["total_time_s"] = run.result.summary["timeline"]["total_time_s"];
    runs.push_back(entry);
  }
  preset.summary = {{"preset", name}, {"seeds", seeds}, {"runs", runs}};

  if (name == "easgd-alpha-sweep") {
    // Best alpha by long-run worker loss among the runs that stayed finite.
    double best = std::numeric_limits<double>::infinity();
    json best_alpha;
    json divergent = json::array();
    for (const PresetRun& run : preset.runs) {
      const double alpha = run.params["alpha"].get<double>();
      if (run.result.mean.diverged) {
        divergent.push_back(alpha);
      } else if (run.result.long_run_worker_gap < best) {
        best = run.result.long_run_worker_gap;
        best_alpha = alpha;
      }
    }
    preset.summary["best_alpha"] = best_alpha;
    preset.summary["divergent_alphas"] = divergent;
    preset.summary["stability_limit"] = 2.0 / (kEasgdWorkers + 1);
  }

  if (name == "floor-sweep") {
    // Runs are laid out zeta-major, tau-minor.
    constexpr std::size_t nt = std::size(kFloorTaus);
    constexpr std::size_t nz = std::size(kFloorZetas);
    auto floor = [&](std::size_t z, std::size_t t) {
      return preset.runs[z * nt + t].result.long_run_floor;
    };
    bool in_tau = true, in_zeta = true;
    for (std::size_t z = 0; z < nz; ++z) {
      for (std::size_t t = 0; t < nt; ++t) {
        if (t + 1 < nt && !(floor(z, t) <= floor(z, t + 1))) in_tau = false;
        if (z + 1 < nz && !(floor(z, t) <= floor(z + 1, t))) in_zeta = false;
      }
    }
    preset.summary["nondecreasing_in_tau"] = in_tau;
    preset.summary["nondecreasing_in_zeta"] = in_zeta;
    preset.summary["strict_between_extremes"] = floor(0, 0) < floor(nz - 1, nt - 1);
  }

  if (name == "hybrid-compare") {
    const ExperimentResult& dpsgd = preset.runs[0].result;
    const ExperimentResult& pasgd = preset.runs[1].result;
    const ExperimentResult& hybrid = preset.runs[2].result;
    preset.summary["hybrid_faster_than_dpsgd"] =
        hybrid.summary["timeline"]["total_time_s"].get<double>() <
        dpsgd.summary["timeline"]["total_time_s"].get<double>();
    preset.summary["hybrid_floor_below_pasgd"] =
        hybrid.long_run_floor < pasgd.long_run_floor;
  }

  if (write_files) {
    fs::create_directories(out_dir);
    WriteFileAtomically(out_dir / "preset.json", preset.summary.dump(2) + "\n");
  }
  return preset;
}

}  // namespace coopsgd

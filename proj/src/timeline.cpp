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

#include "coopsgd/timeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "coopsgd/error.hpp"
#include "coopsgd/rng.hpp"

namespace coopsgd {
namespace {

// Entries below this are treated as absent links.
constexpr double kLinkTol = 1e-14;

}  // namespace

void ValidateDelay(const DelayModel& delay) {
  const bool ok = delay.shift >= 0.0 && delay.mean >= 0.0 &&
                  delay.latency >= 0.0 && delay.per_neighbor >= 0.0 &&
                  std::isfinite(delay.shift) && std::isfinite(delay.mean) &&
                  std::isfinite(delay.latency) &&
                  std::isfinite(delay.per_neighbor);
  if (!ok) throw ConfigError("delay parameters must be finite and >= 0");
}

double TimelineTrace::mean_idle_fraction() const {
  if (idle_fraction.empty()) return 0.0;
  return std::accumulate(idle_fraction.begin(), idle_fraction.end(), 0.0) /
         static_cast<double>(idle_fraction.size());
}

double TimelineTrace::comm_fraction() const {
  const double total = total_time();
  return total > 0.0 ? total_comm_time / total : 0.0;
}

double SyncCost(const MixingMatrix& w, int workers, const DelayModel& delay) {
  const int n = w.size();
  if (workers < 1 || workers > n) {
    throw InvalidDimension("sync cost: worker count outside [1, n]");
  }
  int busiest = 0;
  for (int i = 0; i < workers; ++i) {
    int partners = 0;
    const int reach = delay.nonblocking_aux ? workers : n;
    for (int j = 0; j < reach; ++j) {
      if (j != i && std::abs(w(i, j)) > kLinkTol) ++partners;
    }
    busiest = std::max(busiest, partners);
  }
  return delay.latency + delay.per_neighbor * busiest;
}

TimelineTrace SimulateTimeline(long iterations, int tau, const MixingMatrix& w,
                               int workers, const DelayModel& delay,
                               std::uint64_t seed) {
  ValidateDelay(delay);
  if (tau < 1 || iterations < 1 || iterations % tau != 0) {
    throw ConfigError("timeline: K must be a positive multiple of tau");
  }
  const double sync = SyncCost(w, workers, delay);
  Rng rng = MakeStream(seed, kTimelineStream);
  std::exponential_distribution<double> tail(
      delay.mean > 0.0 ? 1.0 / delay.mean : 1.0);
  const bool random =
      delay.kind == ComputeKind::kShiftedExponential && delay.mean > 0.0;

  TimelineTrace out;
  out.increments.reserve(static_cast<std::size_t>(iterations));
  out.cumulative.reserve(static_cast<std::size_t>(iterations) + 1);
  out.cumulative.push_back(0.0);
  std::vector<double> idle(static_cast<std::size_t>(workers), 0.0);
  std::vector<double> busy(static_cast<std::size_t>(workers));

  const long rounds = iterations / tau;
  for (long r = 0; r < rounds; ++r) {
    for (int i = 0; i < workers; ++i) {
      double sum = delay.shift * tau;
      if (random) {
        for (int s = 0; s < tau; ++s) sum += tail(rng);
      }
      busy[i] = sum;
    }
    const double span = *std::max_element(busy.begin(), busy.end());
    for (int i = 0; i < workers; ++i) idle[i] += span - busy[i];
    out.total_compute_time += span;
    out.total_comm_time += sync;
    // Without random draws every round is c tau long, so c is used directly.
    const double per_iteration =
        (random ? span / tau : delay.shift) + sync / tau;
    for (int s = 0; s < tau; ++s) {
      out.increments.push_back(per_iteration);
      out.cumulative.push_back(out.cumulative.back() + per_iteration);
    }
  }
  const double total = out.total_time();
  out.idle_fraction.resize(idle.size());
  for (std::size_t i = 0; i < idle.size(); ++i) {
    out.idle_fraction[i] = total > 0.0 ? idle[i] / total : 0.0;
  }
  return out;
}

void AttachTimeline(RunTrace& trace, const TimelineTrace& timeline) {
  for (TraceRecord& r : trace.records) {
    if (r.k < 0 || static_cast<std::size_t>(r.k) >= timeline.cumulative.size()) {
      throw InvalidDimension("timeline shorter than the trace");
    }
    r.wall_clock_s = timeline.cumulative[static_cast<std::size_t>(r.k)];
  }
}

nlohmann::json SummaryJson(const TimelineTrace& timeline) {
  return {{"total_time_s", timeline.total_time()},
          {"idle_fraction", timeline.mean_idle_fraction()},
          {"comm_fraction", timeline.comm_fraction()}};
}

nlohmann::json ToJson(const DelayModel& delay) {
  return {{"compute", delay.kind == ComputeKind::kConstant
                          ? "constant"
                          : "shifted_exponential"},
          {"shift", delay.shift},
          {"mean", delay.mean},
          {"comm_latency", delay.latency},
          {"comm_per_neighbor", delay.per_neighbor},
          {"nonblocking_aux", delay.nonblocking_aux}};
}

DelayModel DelayFromJson(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("delay must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key != "compute" && key != "shift" && key != "mean" &&
        key != "comm_latency" && key != "comm_per_neighbor" &&
        key != "nonblocking_aux") {
      throw ConfigError("unknown field in delay: " + key);
    }
  }
  DelayModel delay;
  const std::string kind = j.value("compute", std::string("constant"));
  if (kind == "constant") {
    delay.kind = ComputeKind::kConstant;
  } else if (kind == "shifted_exponential") {
    delay.kind = ComputeKind::kShiftedExponential;
  } else {
    throw ConfigError("unknown compute distribution: " + kind);
  }
  delay.shift = j.value("shift", delay.shift);
  delay.mean = j.value("mean", delay.mean);
  delay.latency = j.value("comm_latency", delay.latency);
  delay.per_neighbor = j.value("comm_per_neighbor", delay.per_neighbor);
  delay.nonblocking_aux = j.value("nonblocking_aux", delay.nonblocking_aux);
  ValidateDelay(delay);
  return delay;
}

}  // namespace coopsgd

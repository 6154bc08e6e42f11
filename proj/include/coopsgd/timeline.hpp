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
#include <vector>

#include "json.hpp"

#include "coopsgd/engine.hpp"
#include "coopsgd/mixing.hpp"

namespace coopsgd {

enum class ComputeKind { kConstant, kShiftedExponential };

/// Per-iteration compute time is `shift` (+ an exponential with mean
/// `mean` for kShiftedExponential). A synchronization costs
/// latency + per_neighbor * (partners of the busiest worker).
struct DelayModel {
  ComputeKind kind = ComputeKind::kConstant;
  double shift = 1.0;
  double mean = 0.0;
  double latency = 0.0;
  double per_neighbor = 0.0;
  /// Auxiliary exchanges overlap the next local-update phase.
  bool nonblocking_aux = false;

  bool operator==(const DelayModel&) const = default;
};

void ValidateDelay(const DelayModel& delay);

struct TimelineTrace {
  /// increments[k-1] is the time charged to iteration k (round time spread
  /// evenly over the round's tau iterations); cumulative[k] is the clock
  /// after iteration k, with cumulative[0] = 0.
  std::vector<double> increments;
  std::vector<double> cumulative;
  std::vector<double> idle_fraction;  // per worker: waiting / total time
  double total_comm_time = 0.0;
  double total_compute_time = 0.0;  // sum of round compute spans

  double total_time() const {
    return cumulative.empty() ? 0.0 : cumulative.back();
  }
  double mean_idle_fraction() const;
  double comm_fraction() const;
};

/// latency + per_neighbor * max over workers of their nonzero off-diagonal
/// partners. Nodes at index >= workers are auxiliaries; exchanges with them
/// are free when nonblocking_aux is set.
double SyncCost(const MixingMatrix& w, int workers, const DelayModel& delay);

/// Workers run lockstep rounds of tau local steps. A round lasts as long as
/// the slowest worker's tau compute draws, plus one sync. Draws come from a
/// single stream seeded by `seed`.
TimelineTrace SimulateTimeline(long iterations, int tau, const MixingMatrix& w,
                               int workers, const DelayModel& delay,
                               std::uint64_t seed);

/// Copies cumulative times into the trace's wall_clock_s column.
void AttachTimeline(RunTrace& trace, const TimelineTrace& timeline);

/// {"total_time_s", "idle_fraction", "comm_fraction"}
nlohmann::json SummaryJson(const TimelineTrace& timeline);

nlohmann::json ToJson(const DelayModel& delay);
/// Unknown keys are rejected.
DelayModel DelayFromJson(const nlohmann::json& j);

}  // namespace coopsgd

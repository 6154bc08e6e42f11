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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "coopsgd/error.hpp"
#include "coopsgd/timeline.hpp"

using namespace coopsgd;

namespace {

DelayModel Constant(double c, double b, double p) {
  DelayModel d;
  d.kind = ComputeKind::kConstant;
  d.shift = c;
  d.latency = b;
  d.per_neighbor = p;
  return d;
}

DelayModel Exponential(double c, double mean, double b, double p) {
  DelayModel d = Constant(c, b, p);
  d.kind = ComputeKind::kShiftedExponential;
  d.mean = mean;
  return d;
}

}  // namespace

TEST_CASE("sync cost counts the busiest worker's partners") {
  const DelayModel d = Constant(1.0, 1.0, 0.1);
  CHECK(SyncCost(MakeRing(8), 8, d) == doctest::Approx(1.2));
  CHECK(SyncCost(MakeFullyConnected(8), 8, d) == doctest::Approx(1.7));
  CHECK(SyncCost(MixingMatrix::Identity(4), 4, d) == doctest::Approx(1.0));
  // Each EASGD worker talks only to the anchor.
  CHECK(SyncCost(MakeEasgd(6, 0.1), 6, d) == doctest::Approx(1.1));
  DelayModel overlap = d;
  overlap.nonblocking_aux = true;
  CHECK(SyncCost(MakeEasgd(6, 0.1), 6, overlap) == doctest::Approx(1.0));
  CHECK_THROWS_AS(SyncCost(MakeRing(4), 5, d), InvalidDimension);
}

TEST_CASE("constant delays: per-iteration time is c + sync/tau") {
  // Dyadic values make every operation exact.
  const DelayModel d = Constant(0.5, 0.25, 0.125);
  const MixingMatrix w = MakeRing(6);
  const double sync = SyncCost(w, 6, d);
  CHECK(sync == 0.5);
  for (int tau : {1, 2, 4, 8}) {
    const TimelineTrace t = SimulateTimeline(64, tau, w, 6, d, 1);
    REQUIRE(t.increments.size() == 64);
    REQUIRE(t.cumulative.size() == 65);
    CHECK(t.cumulative.front() == 0.0);
    for (double inc : t.increments) CHECK(inc == 0.5 + sync / tau);
    CHECK(t.total_time() == 64 * (0.5 + sync / tau));
    CHECK(t.mean_idle_fraction() == 0.0);
  }
  // Non-dyadic values agree to rounding.
  const DelayModel odd = Constant(0.3, 0.7, 0.11);
  const TimelineTrace t = SimulateTimeline(30, 3, w, 6, odd, 1);
  for (double inc : t.increments) {
    CHECK(inc == 0.3 + SyncCost(w, 6, odd) / 3);
  }
}

TEST_CASE("periodic averaging cuts communication time by tau") {
  const DelayModel d = Constant(1.0, 2.0, 0.5);
  const MixingMatrix j = MakeFullyConnected(8);
  const TimelineTrace sync = SimulateTimeline(1000, 1, j, 8, d, 3);
  const TimelineTrace local = SimulateTimeline(1000, 10, j, 8, d, 3);
  CHECK(sync.total_comm_time == 10 * local.total_comm_time);
  CHECK(local.comm_fraction() < sync.comm_fraction());
}

TEST_CASE("non-blocking auxiliaries never slow a run down") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    DelayModel d = Exponential(1.0, 0.5, 0.3, 0.2);
    const MixingMatrix w = MakeEasgd(5, 0.2);
    const TimelineTrace blocking = SimulateTimeline(200, 1, w, 5, d, seed);
    d.nonblocking_aux = true;
    const TimelineTrace overlapped = SimulateTimeline(200, 1, w, 5, d, seed);
    for (std::size_t k = 0; k < blocking.cumulative.size(); ++k) {
      CHECK(overlapped.cumulative[k] <= blocking.cumulative[k]);
    }
  }
}

TEST_CASE("random compute times: waiting, monotone clock, reproducibility") {
  const DelayModel d = Exponential(1.0, 0.5, 0.1, 0.05);
  const MixingMatrix w = MakeRing(5);
  const TimelineTrace a = SimulateTimeline(120, 4, w, 5, d, 9);
  const TimelineTrace b = SimulateTimeline(120, 4, w, 5, d, 9);
  const TimelineTrace c = SimulateTimeline(120, 4, w, 5, d, 10);
  CHECK(a.cumulative == b.cumulative);
  CHECK(a.cumulative != c.cumulative);
  for (std::size_t k = 1; k < a.cumulative.size(); ++k) {
    CHECK(a.cumulative[k] > a.cumulative[k - 1]);
  }
  CHECK(a.mean_idle_fraction() > 0.0);
  CHECK(a.mean_idle_fraction() < 1.0);
  // Every iteration costs at least the deterministic shift.
  for (double inc : a.increments) CHECK(inc >= 1.0);
}

TEST_CASE("local updates with tau >= m beat a ring when p <= b") {
  // Within the constant model: m = 8 workers, PASGD with tau = 8 against
  // ring D-PSGD.
  const DelayModel d = Constant(1.0, 1.0, 0.5);
  const TimelineTrace pasgd =
      SimulateTimeline(800, 8, MakeFullyConnected(8), 8, d, 1);
  const TimelineTrace dpsgd = SimulateTimeline(800, 1, MakeRing(8), 8, d, 1);
  CHECK(pasgd.total_time() < dpsgd.total_time());
}

TEST_CASE("attaching the clock to a trace") {
  RunTrace trace;
  for (long k = 0; k <= 4; ++k) {
    TraceRecord r;
    r.k = k;
    trace.records.push_back(r);
  }
  const TimelineTrace t =
      SimulateTimeline(4, 2, MakeFullyConnected(2), 2, Constant(1.0, 1.0, 0.0), 0);
  AttachTimeline(trace, t);
  CHECK(trace.records[2].wall_clock_s == 3.0);
  CHECK(trace.records[4].wall_clock_s == 6.0);

  RunTrace longer = trace;
  TraceRecord extra;
  extra.k = 5;
  longer.records.push_back(extra);
  CHECK_THROWS_AS(AttachTimeline(longer, t), InvalidDimension);
}

TEST_CASE("delay json and validation") {
  DelayModel d = Exponential(0.5, 0.25, 1.0, 0.1);
  d.nonblocking_aux = true;
  CHECK(DelayFromJson(ToJson(d)) == d);
  nlohmann::json bad = ToJson(d);
  bad["jitter"] = 0.1;
  CHECK_THROWS_AS(DelayFromJson(bad), ConfigError);
  bad = ToJson(d);
  bad["compute"] = "pareto";
  CHECK_THROWS_AS(DelayFromJson(bad), ConfigError);
  CHECK_THROWS_AS(ValidateDelay(Constant(-1.0, 0.0, 0.0)), ConfigError);
  CHECK_THROWS_AS(SimulateTimeline(10, 3, MakeRing(3), 3, d, 0), ConfigError);

  const nlohmann::json s = SummaryJson(SimulateTimeline(
      10, 1, MakeRing(3), 3, Constant(1.0, 1.0, 0.0), 0));
  CHECK(s.at("total_time_s") == doctest::Approx(20.0));
  CHECK(s.at("comm_fraction") == doctest::Approx(0.5));
  CHECK(s.at("idle_fraction") == 0.0);
}

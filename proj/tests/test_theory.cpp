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
#include <memory>

#include "coopsgd/engine.hpp"
#include "coopsgd/error.hpp"
#include "coopsgd/theory.hpp"

using namespace coopsgd;
using namespace coopsgd::theory;

namespace {

BoundInputs Sample() {
  BoundInputs in;
  in.f1_minus_finf = 2.0;
  in.lipschitz = 1.5;
  in.sigma_sq = 0.8;
  in.workers = 4;
  in.auxiliaries = 1;
  in.tau = 3;
  in.zeta = 0.5;
  in.eta = 0.05;
  in.iterations = 1000;
  return in;
}

}  // namespace

TEST_CASE("theorem bound terms at a worked point") {
  // Expected values evaluated separately in exact rational arithmetic.
  const BoundReport r = StationarityBound(Sample());
  CHECK(r.terms.opt_term == doctest::Approx(0.1).epsilon(1e-13));
  CHECK(r.terms.stat_term == doctest::Approx(0.012).epsilon(1e-13));
  CHECK(r.terms.network_term == doctest::Approx(0.018).epsilon(1e-13));
  CHECK(r.floor == doctest::Approx(0.03).epsilon(1e-13));
  CHECK(r.bound == doctest::Approx(0.13).epsilon(1e-13));
  CHECK(r.lr.lhs == doctest::Approx(1.0725).epsilon(1e-13));
  CHECK_FALSE(r.lr.ok);

  BoundInputs with_beta = Sample();
  with_beta.beta = 0.5;
  CHECK(LearningRateCondition(with_beta).lhs == doctest::Approx(0.39375).epsilon(1e-13));
}

TEST_CASE("zeta outside [0,1) is rejected") {
  BoundInputs in = Sample();
  in.zeta = 1.0;
  CHECK_THROWS_AS(StationarityBound(in), ValidationError);
  in.zeta = -0.1;
  CHECK_THROWS_AS(LearningRateCondition(in), ValidationError);
  CHECK_THROWS_AS(DpsgdBound(1, 1, 1, 2, 1.0, 0.1, 10), ValidationError);
}

TEST_CASE("fully synchronous SGD has no network term") {
  BoundInputs in = Sample();
  in.zeta = 0.0;
  in.tau = 1;
  in.auxiliaries = 0;
  CHECK(StationarityBound(in).terms.network_term == 0.0);
}

TEST_CASE("effective-rate helper") {
  const BoundInputs in = BoundInputs::WithEffectiveRate(Sample(), 0.04);
  CHECK(in.eta == doctest::Approx(0.05));
  CHECK(in.eta_tilde() == doctest::Approx(0.04));
}

TEST_CASE("finite-horizon choice") {
  const FiniteHorizon h = FiniteHorizonBound(2.0, 1.5, 0.8, 4, 1, 3, 0.5, 10000);
  CHECK(h.eta == doctest::Approx(1.0 / 60.0).epsilon(1e-14));
  CHECK(h.k_min == 2250);
  CHECK(h.k_min_tight == 5625);

  // Plugging the prescribed rate into the general bound reproduces it.
  BoundInputs in = Sample();
  in.iterations = 10000;
  in.eta = h.eta;
  CHECK(StationarityBound(in).bound == doctest::Approx(h.bound).epsilon(1e-12));

  // At K = k_min the prescribed rate satisfies the learning-rate condition.
  const FiniteHorizon at_min =
      FiniteHorizonBound(2.0, 1.5, 0.8, 4, 1, 3, 0.5, h.k_min);
  in.iterations = h.k_min;
  in.eta = at_min.eta;
  CHECK(LearningRateCondition(in).ok);
}

TEST_CASE("special-case bounds coincide with the general one") {
  // Periodic averaging: zeta = 0, v = 0.
  BoundInputs p = Sample();
  p.zeta = 0.0;
  p.auxiliaries = 0;
  p.tau = 7;
  const SimpleBound pasgd = PasgdBound(p.f1_minus_finf, p.lipschitz, p.sigma_sq,
                                       p.workers, p.tau, p.eta, p.iterations);
  CHECK(pasgd.bound == doctest::Approx(StationarityBound(p).bound).epsilon(1e-13));

  // Decentralized: tau = 1, v = 0.
  BoundInputs d = Sample();
  d.tau = 1;
  d.auxiliaries = 0;
  d.zeta = 0.6;
  const SimpleBound dpsgd = DpsgdBound(d.f1_minus_finf, d.lipschitz, d.sigma_sq,
                                       d.workers, d.zeta, d.eta, d.iterations);
  CHECK(dpsgd.bound == doctest::Approx(StationarityBound(d).bound).epsilon(1e-13));

  // Elastic averaging at the best coupling: v = 1, zeta = m/(m+2).
  BoundInputs e = Sample();
  e.tau = 1;
  e.auxiliaries = 1;
  e.zeta = static_cast<double>(e.workers) / (e.workers + 2);
  CHECK(EasgdBound(e.f1_minus_finf, e.lipschitz, e.sigma_sq, e.workers,
                   e.eta_tilde(), e.iterations) ==
        doctest::Approx(StationarityBound(e).bound).epsilon(1e-13));
}

TEST_CASE("zeta threshold") {
  CHECK(ZetaThreshold(1) == 0.0);
  CHECK(ZetaThreshold(3) == doctest::Approx(std::sqrt(0.5)));
  CHECK_THROWS_AS(ZetaThreshold(0), ConfigError);
  for (int tau = 1; tau <= 50; ++tau) {
    const double z = ZetaThreshold(tau);
    CHECK(2 * z * z / (1 - z * z) == doctest::Approx(tau - 1.0).epsilon(1e-12));
  }
}

TEST_CASE("error decomposition holds on a seed-averaged run") {
  Eigen::VectorXd diag(10);
  for (int i = 0; i < 10; ++i) diag(i) = 0.1 * (i + 1);
  const Eigen::MatrixXd a = diag.asDiagonal();
  auto q = std::make_shared<QuadraticProblem>(a, a * Eigen::VectorXd::Ones(10), 1.0);

  AlgorithmConfig c;
  c.workers = 4;
  c.tau = 4;
  c.mixing = MakeRing(4);
  c.eta = 0.1;
  c.iterations = 400;
  std::vector<RunTrace> traces;
  for (std::uint64_t s = 1; s <= 10; ++s) {
    c.seed = s;
    traces.push_back(Run(c, q));
  }
  const RunTrace mean = AverageTraces(traces);

  BoundInputs in;
  in.f1_minus_finf = q->Value(Eigen::VectorXd::Zero(10)) - q->f_inf();
  in.lipschitz = q->lipschitz();
  in.sigma_sq = 1.0;
  in.workers = 4;
  in.tau = 4;
  in.zeta = c.mixing.zeta();
  in.eta = c.eta;
  in.iterations = c.iterations;
  const EmpiricalCheck check = ErrorDecompositionCheck(mean, in);
  CHECK(check.applicable);
  CHECK(check.holds);
  CHECK(check.measured > 0.0);

  in.eta = 5.0;
  CHECK_FALSE(ErrorDecompositionCheck(mean, in).applicable);
}

TEST_CASE("bound report json keys") {
  const nlohmann::json j = ToJson(StationarityBound(Sample()));
  for (const char* key : {"lr_lhs", "lr_ok", "bound", "floor", "opt_term",
                          "stat_term", "network_term"}) {
    CHECK(j.contains(key));
  }
}

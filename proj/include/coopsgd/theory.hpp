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

#include "json.hpp"

#include "coopsgd/engine.hpp"

namespace coopsgd::theory {

/// Every constant the cooperative-SGD bounds depend on. `eta` is the raw
/// worker learning rate; the bounds use eta_tilde() = m eta / (m + v).
struct BoundInputs {
  double f1_minus_finf = 0.0;
  double lipschitz = 1.0;
  double sigma_sq = 0.0;
  double beta = 0.0;
  int workers = 1;
  int auxiliaries = 0;
  int tau = 1;
  double zeta = 0.0;
  double eta = 0.0;
  long iterations = 1;

  double eta_tilde() const {
    return EffectiveLearningRate(eta, workers, auxiliaries);
  }
  /// Builds inputs with eta chosen so that eta_tilde() == eta_tilde.
  static BoundInputs WithEffectiveRate(BoundInputs base, double eta_tilde);
};

struct LrCondition {
  double lhs = 0.0;
  bool ok = false;
};

struct BoundDecomposition {
  double opt_term = 0.0;      // 2 (F_1 - F_inf) / (eta_tilde K)
  double stat_term = 0.0;     // eta_tilde L sigma^2 / m
  double network_term = 0.0;  // local-update / sparse-mixing penalty
};

struct BoundReport {
  LrCondition lr;
  double bound = 0.0;  // opt + stat + network
  double floor = 0.0;  // stat + network, the K -> infinity limit
  BoundDecomposition terms;
};

/// beta == 0:  eta~ L + 5 eta~^2 L^2 ((1 + v/m) tau / (1 - zeta))^2 <= 1.
/// beta > 0:   the general condition
///   eta~ L (beta/m + 1) + 2 eta^2 L^2 beta tau / (1 - zeta^2)
///     + eta^2 L^2 tau^2 / (1 - zeta)
///       * (2 zeta^2/(1+zeta) + 2 zeta/(1-zeta) + (tau-1)/tau) <= 1.
/// Throws ValidationError for zeta >= 1.
LrCondition LearningRateCondition(const BoundInputs& in);

/// Cooperative-SGD bound after K iterations, split into its three terms.
/// A violated learning-rate condition is reported in `lr`, not thrown.
BoundReport StationarityBound(const BoundInputs& in);

struct FiniteHorizon {
  double eta = 0.0;
  double bound = 0.0;
  long k_min = 0;        // K needed for the prescribed eta to be admissible
  long k_min_tight = 0;  // K beyond which the bound is 2[L dF + sigma^2]/sqrt(mK)
};

/// eta = ((m+v)/(L m)) sqrt(m/K) and the resulting two-term bound.
FiniteHorizon FiniteHorizonBound(double f1_minus_finf, double lipschitz,
                              double sigma_sq, int workers, int auxiliaries,
                              int tau, double zeta, long iterations);

struct SimpleBound {
  LrCondition lr;
  double bound = 0.0;
};

/// A(tau, J, 0): eta L + eta^2 L^2 tau (tau-1) <= 1 and
/// 2 dF/(eta K) + eta L sigma^2/m + eta^2 L^2 sigma^2 (tau - 1).
SimpleBound PasgdBound(double f1_minus_finf, double lipschitz,
                       double sigma_sq, int workers, int tau, double eta,
                       long iterations);

/// A(1, W, 0): eta L + eta^2 L^2 (2 zeta/(1-zeta)) (zeta/(1+zeta) + 1/(1-zeta))
/// <= 1 and 2 dF/(eta K) + eta L sigma^2/m + eta^2 L^2 sigma^2 2 zeta^2/(1-zeta^2).
SimpleBound DpsgdBound(double f1_minus_finf, double lipschitz,
                       double sigma_sq, int workers, double zeta, double eta,
                       long iterations);

/// EASGD at alpha = 2/(m+2):
/// 2 dF/(eta~ K) + eta~ L sigma^2/m + eta~^2 L^2 sigma^2 (m+1)/2.
double EasgdBound(double f1_minus_finf, double lipschitz, double sigma_sq,
                  int workers, double eta_tilde, long iterations);

/// sqrt(1 - 2/(tau+1)): decentralized averaging with zeta at or below this
/// value has a floor no higher than periodic averaging with period tau.
double ZetaThreshold(int tau);

struct EmpiricalCheck {
  bool applicable = false;
  double rhs = 0.0;
  double measured = 0.0;
  bool holds = false;
};

/// Substitutes the trace's measured network errors into the error
/// decomposition
///   mean ||grad F(xbar_k)||^2 <= 2 dF/(eta~ K) + eta~ L sigma^2/m
///                                + (L^2/K) sum_k ||X_k (I-J)||_F^2 / m
/// over k = 0..K-1. Not applicable unless eta~ L (1 + beta/m) <= 1 and the
/// trace is complete. Pass a seed-averaged trace: the inequality holds in
/// expectation.
EmpiricalCheck ErrorDecompositionCheck(const RunTrace& trace,
                                       const BoundInputs& in);

/// {"lr_lhs", "lr_ok", "bound", "floor", "opt_term", "stat_term",
///  "network_term"}
nlohmann::json ToJson(const BoundReport& report);

}  // namespace coopsgd::theory

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

#include "coopsgd/theory.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "coopsgd/error.hpp"

namespace coopsgd::theory {
namespace {

void RequireContracting(double zeta) {
  if (!(zeta < 1.0) || !(zeta >= 0.0)) {
    throw ValidationError("zeta must lie in [0, 1), got " +
                          std::to_string(zeta));
  }
}

// Smallest integer >= x, forgiving last-bit rounding above an integer.
long CeilTolerant(double x) {
  const double r = std::round(x);
  if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x))) {
    return static_cast<long>(r);
  }
  return static_cast<long>(std::ceil(x));
}

// (1 + zeta^2)/(1 - zeta^2) tau - 1
double NetworkFactor(double zeta, int tau) {
  return (1.0 + zeta * zeta) / (1.0 - zeta * zeta) * tau - 1.0;
}

}  // namespace

BoundInputs BoundInputs::WithEffectiveRate(BoundInputs base,
                                           double eta_tilde) {
  base.eta = eta_tilde * (base.workers + base.auxiliaries) / base.workers;
  return base;
}

LrCondition LearningRateCondition(const BoundInputs& in) {
  RequireContracting(in.zeta);
  const double m = in.workers;
  const double lt = in.eta_tilde() * in.lipschitz;
  LrCondition out;
  if (in.beta == 0.0) {
    const double period = (1.0 + in.auxiliaries / m) * in.tau / (1.0 - in.zeta);
    out.lhs = lt + 5.0 * lt * lt * period * period;
  } else {
    const double z = in.zeta;
    const double tau = in.tau;
    const double el = in.eta * in.lipschitz;
    out.lhs = lt * (in.beta / m + 1.0) +
              2.0 * el * el * in.beta * tau / (1.0 - z * z) +
              el * el * tau * tau / (1.0 - z) *
                  (2.0 * z * z / (1.0 + z) + 2.0 * z / (1.0 - z) +
                   (tau - 1.0) / tau);
  }
  out.ok = out.lhs <= 1.0;
  return out;
}

BoundReport StationarityBound(const BoundInputs& in) {
  BoundReport report;
  report.lr = LearningRateCondition(in);
  const double m = in.workers;
  const double et = in.eta_tilde();
  const double spread = 1.0 + in.auxiliaries / m;
  report.terms.opt_term =
      2.0 * in.f1_minus_finf / (et * static_cast<double>(in.iterations));
  report.terms.stat_term = et * in.lipschitz * in.sigma_sq / m;
  report.terms.network_term = et * et * in.lipschitz * in.lipschitz *
                              in.sigma_sq * NetworkFactor(in.zeta, in.tau) *
                              spread * spread;
  report.floor = report.terms.stat_term + report.terms.network_term;
  report.bound = report.terms.opt_term + report.floor;
  return report;
}

FiniteHorizon FiniteHorizonBound(double f1_minus_finf, double lipschitz,
                              double sigma_sq, int workers, int auxiliaries,
                              int tau, double zeta, long iterations) {
  RequireContracting(zeta);
  const double m = workers;
  const double k = static_cast<double>(iterations);
  const double spread = 1.0 + auxiliaries / m;
  FiniteHorizon out;
  out.eta = (m + auxiliaries) / (lipschitz * m) * std::sqrt(m / k);
  out.bound = (2.0 * lipschitz * f1_minus_finf + sigma_sq) / std::sqrt(m * k) +
              m / k * spread * spread * NetworkFactor(zeta, tau) * sigma_sq;
  const double period = spread * tau / (1.0 - zeta);
  out.k_min = CeilTolerant(10.0 * m * period * period);
  out.k_min_tight =
      CeilTolerant((m + auxiliaries) * (m + auxiliaries) * m * period * period);
  return out;
}

SimpleBound PasgdBound(double f1_minus_finf, double lipschitz,
                       double sigma_sq, int workers, int tau, double eta,
                       long iterations) {
  const double el = eta * lipschitz;
  SimpleBound out;
  out.lr.lhs = el + el * el * tau * (tau - 1.0);
  out.lr.ok = out.lr.lhs <= 1.0;
  out.bound = 2.0 * f1_minus_finf / (eta * static_cast<double>(iterations)) +
              el * sigma_sq / workers + el * el * sigma_sq * (tau - 1.0);
  return out;
}

SimpleBound DpsgdBound(double f1_minus_finf, double lipschitz,
                       double sigma_sq, int workers, double zeta, double eta,
                       long iterations) {
  RequireContracting(zeta);
  const double el = eta * lipschitz;
  SimpleBound out;
  out.lr.lhs = el + el * el * (2.0 * zeta / (1.0 - zeta)) *
                        (zeta / (1.0 + zeta) + 1.0 / (1.0 - zeta));
  out.lr.ok = out.lr.lhs <= 1.0;
  out.bound = 2.0 * f1_minus_finf / (eta * static_cast<double>(iterations)) +
              el * sigma_sq / workers +
              el * el * sigma_sq * 2.0 * zeta * zeta / (1.0 - zeta * zeta);
  return out;
}

double EasgdBound(double f1_minus_finf, double lipschitz, double sigma_sq,
                  int workers, double eta_tilde, long iterations) {
  const double el = eta_tilde * lipschitz;
  return 2.0 * f1_minus_finf / (eta_tilde * static_cast<double>(iterations)) +
         el * sigma_sq / workers + 0.5 * el * el * sigma_sq * (workers + 1.0);
}

double ZetaThreshold(int tau) {
  if (tau < 1) throw ConfigError("tau must be >= 1");
  return std::sqrt(1.0 - 2.0 / (tau + 1.0));
}

EmpiricalCheck ErrorDecompositionCheck(const RunTrace& trace,
                                       const BoundInputs& in) {
  EmpiricalCheck out;
  const long k = in.iterations;
  const double et = in.eta_tilde();
  if (trace.diverged ||
      static_cast<long>(trace.records.size()) < k + 1 ||
      et * in.lipschitz * (1.0 + in.beta / in.workers) > 1.0) {
    return out;
  }
  out.applicable = true;
  double network = 0.0;
  double gradients = 0.0;
  for (long i = 0; i < k; ++i) {
    network += trace.records[static_cast<std::size_t>(i)].network_error;
    gradients += trace.records[static_cast<std::size_t>(i)].grad_norm_sq;
  }
  const double kd = static_cast<double>(k);
  out.measured = gradients / kd;
  out.rhs = 2.0 * in.f1_minus_finf / (et * kd) +
            et * in.lipschitz * in.sigma_sq / in.workers +
            in.lipschitz * in.lipschitz / kd * network / in.workers;
  out.holds = out.measured <= out.rhs;
  return out;
}

nlohmann::json ToJson(const BoundReport& report) {
  return {{"lr_lhs", report.lr.lhs},
          {"lr_ok", report.lr.ok},
          {"bound", report.bound},
          {"floor", report.floor},
          {"opt_term", report.terms.opt_term},
          {"stat_term", report.terms.stat_term},
          {"network_term", report.terms.network_term}};
}

}  // namespace coopsgd::theory

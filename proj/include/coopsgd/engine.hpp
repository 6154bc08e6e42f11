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
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "coopsgd/mixing.hpp"
#include "coopsgd/objectives.hpp"
#include "coopsgd/rng.hpp"

namespace coopsgd {

enum class UpdateRule {
  kPostMultiply,  // X_{k+1} = (X_k - eta G_k) W_k
  kPreMultiply,   // X_{k+1} = X_k W_k - eta G_k
};

/// d x (m+v) matrix: worker models in columns [0, m), auxiliary variables in
/// columns [m, m+v).
struct ParamMatrix {
  Eigen::MatrixXd x;
  int workers = 0;
  int auxiliaries = 0;

  /// Every column set to `x0`.
  static ParamMatrix Uniform(const Eigen::VectorXd& x0, int workers,
                             int auxiliaries);

  int dimension() const { return static_cast<int>(x.rows()); }
  int nodes() const { return workers + auxiliaries; }
};

/// A(tau, W, v) plus the run parameters.
struct AlgorithmConfig {
  int workers = 1;
  int auxiliaries = 0;
  int tau = 1;
  MixingMatrix mixing = MakeFullyConnected(1);
  double eta = 0.01;
  long iterations = 1;  // K
  std::uint64_t seed = 0;
  UpdateRule rule = UpdateRule::kPostMultiply;
  /// Common starting point; empty means the origin.
  Eigen::VectorXd x0;
};

/// Throws ConfigError unless K % tau == 0, W has size m+v, eta > 0, m >= 1,
/// v >= 0 and K >= 1.
void ValidateConfig(const AlgorithmConfig& config);

/// One iteration of the matrix update. `g` must have zero auxiliary columns.
ParamMatrix CoopStep(const ParamMatrix& params, const MixingMatrix& mixing,
                     double eta, const Eigen::MatrixXd& g, UpdateRule rule);

/// Mean over all m+v columns.
Eigen::VectorXd AveragedModel(const ParamMatrix& params);

/// m eta / (m + v).
double EffectiveLearningRate(double eta, int workers, int auxiliaries);

/// ||X (I - J)||_F^2: squared distance of every column to the column mean.
double NetworkError(const ParamMatrix& params);

struct TraceRecord {
  long k = 0;                 // state after k iterations
  double loss = 0.0;          // F(averaged model)
  double grad_norm_sq = 0.0;  // ||grad F(averaged model)||^2
  double network_error = 0.0;
  double worker_loss = 0.0;   // mean of F over the worker models
  double wall_clock_s = 0.0;
};

/// Records for k = 0..K (fewer if the run diverged).
struct RunTrace {
  std::vector<TraceRecord> records;
  long iterations = 0;
  bool diverged = false;
  /// Mean of grad_norm_sq over k = 0..K-1, i.e. the K states the
  /// convergence metric averages. NaN for diverged traces.
  double mean_grad_norm_sq = 0.0;
  double final_loss = 0.0;
  /// Largest per-step deviation from the averaged-model recursion, scaled by
  /// max(1, |entries involved|).
  double max_recursion_defect = 0.0;
};

/// Steps A(tau, W, v) one iteration at a time. Worker i draws its stochastic
/// gradients from stream MakeStream(seed, i).
class Simulator {
 public:
  Simulator(AlgorithmConfig config,
            std::shared_ptr<const GradientOracle> oracle);

  /// Advances one iteration. Returns false (and leaves the state
  /// untouched) once a non-finite value has appeared.
  bool Step();

  const ParamMatrix& params() const { return params_; }
  long iteration() const { return iteration_; }
  bool diverged() const { return diverged_; }
  double max_recursion_defect() const { return max_recursion_defect_; }
  const AlgorithmConfig& config() const { return config_; }
  TraceRecord Observe() const;

 private:
  AlgorithmConfig config_;
  std::shared_ptr<const GradientOracle> oracle_;
  MixingSchedule schedule_;
  std::vector<Rng> streams_;
  ParamMatrix params_;
  Eigen::MatrixXd gradients_;
  long iteration_ = 0;
  bool diverged_ = false;
  double max_recursion_defect_ = 0.0;
};

/// Executes K iterations. Divergence truncates the trace and sets
/// `diverged`; it is not an error.
RunTrace Run(const AlgorithmConfig& config,
             std::shared_ptr<const GradientOracle> oracle);

/// Record-wise mean of the non-diverged traces. All of them must have the
/// same length. The result is flagged diverged (and empty) when every input
/// diverged.
RunTrace AverageTraces(std::span<const RunTrace> traces);

/// Mean of `field` over the final `fraction` of the records.
double LongRunMean(const RunTrace& trace, double TraceRecord::*field,
                   double fraction = 0.2);

namespace reference {

// Literal per-worker transcriptions of the classic update rules, written
// against plain vectors without going through CoopStep.

/// x <- x - eta * (1/m) sum_i g_i, applied to every worker copy.
void FullSyncStep(std::vector<Eigen::VectorXd>& models,
                  std::span<const Eigen::VectorXd> grads, double eta);

/// Local steps, and the average of the stepped models whenever k % tau == 0.
void PeriodicAveragingStep(std::vector<Eigen::VectorXd>& models,
                           std::span<const Eigen::VectorXd> grads, double eta,
                           long k, int tau);

/// x_i <- x_i - eta g_i - alpha (x_i - z);  z <- (1 - m alpha) z + m alpha xbar.
void ElasticAveragingStep(std::vector<Eigen::VectorXd>& models,
                          Eigen::VectorXd& center,
                          std::span<const Eigen::VectorXd> grads, double eta,
                          double alpha);

/// x_i <- sum_j w_ji x_j - eta g_i.
void DecentralizedStep(std::vector<Eigen::VectorXd>& models,
                       std::span<const Eigen::VectorXd> grads, double eta,
                       const Eigen::MatrixXd& w);

enum class Algorithm { kFullSync, kPeriodic, kElastic, kDecentralized };

/// Runs `config` through Simulator and the matching reference rule side by
/// side with identical gradient streams, returning the largest absolute
/// parameter difference seen at any step. For kElastic, `alpha` is the
/// coupling used by the reference; config.mixing must be the matching
/// elastic matrix.
double MaxTrajectoryDeviation(Algorithm algorithm,
                              const AlgorithmConfig& config,
                              std::shared_ptr<const GradientOracle> oracle,
                              double alpha = 0.0);

}  // namespace reference
}  // namespace coopsgd

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

#include <Eigen/Dense>
#include "json.hpp"

#include "coopsgd/rng.hpp"

namespace coopsgd {

/// Objective F with a stochastic first-order oracle and the constants the
/// convergence bounds consume: smoothness L, noise parameters (beta, sigma^2)
/// with E||g - grad F||^2 <= beta ||grad F||^2 + sigma^2, and F_inf.
///
/// Oracles are immutable; all randomness comes from the caller's stream.
class GradientOracle {
 public:
  virtual ~GradientOracle() = default;

  virtual int dimension() const = 0;
  virtual double Value(const Eigen::VectorXd& x) const = 0;
  /// Throws ValidationError on non-finite or wrongly sized input.
  virtual Eigen::VectorXd Gradient(const Eigen::VectorXd& x) const = 0;
  virtual Eigen::VectorXd StochasticGradient(const Eigen::VectorXd& x,
                                             Rng& rng) const = 0;

  virtual double lipschitz() const = 0;
  virtual double beta() const = 0;
  virtual double sigma_sq() const = 0;
  virtual double f_inf() const = 0;

  virtual nlohmann::json ToJson() const = 0;
};

/// F(x) = 1/2 x^T A x - b^T x with A symmetric PSD and b in range(A).
///
/// Stochastic gradients are grad F(x) (1 + sqrt(beta) u) + n with u ~ N(0,1)
/// and n ~ N(0, (sigma^2/d) I), so the variance bound holds with equality.
class QuadraticProblem final : public GradientOracle {
 public:
  QuadraticProblem(Eigen::MatrixXd a, Eigen::VectorXd b, double sigma_sq,
                   double beta = 0.0);

  int dimension() const override { return static_cast<int>(b_.size()); }
  double Value(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd Gradient(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd StochasticGradient(const Eigen::VectorXd& x,
                                     Rng& rng) const override;
  double lipschitz() const override { return lipschitz_; }
  double beta() const override { return beta_; }
  double sigma_sq() const override { return sigma_sq_; }
  double f_inf() const override { return f_inf_; }
  nlohmann::json ToJson() const override;

  const Eigen::MatrixXd& a() const { return a_; }
  const Eigen::VectorXd& b() const { return b_; }
  const Eigen::VectorXd& minimizer() const { return minimizer_; }

 private:
  Eigen::MatrixXd a_;
  Eigen::VectorXd b_;
  double sigma_sq_;
  double beta_;
  double lipschitz_ = 0.0;
  Eigen::VectorXd minimizer_;
  double f_inf_ = 0.0;
};

struct LogisticOptions {
  int samples = 100;
  int dimension = 10;
  std::uint64_t seed = 0;
  double l2 = 0.0;
  int batch = 1;

  bool operator==(const LogisticOptions&) const = default;
};

/// Empirical logistic risk with a ridge term on synthetic data:
///   F(w) = (1/N) sum log(1 + exp(-y_i x_i^T w)) + (l2/2) ||w||^2.
/// Features are standard normal, labels follow a planted separator with 10%
/// of them flipped. Stochastic gradients average a mini-batch drawn uniformly
/// with replacement.
class LogisticProblem final : public GradientOracle {
 public:
  explicit LogisticProblem(const LogisticOptions& options);
  /// Explicit data; `labels` entries must be +1 or -1.
  LogisticProblem(Eigen::MatrixXd features, Eigen::VectorXd labels, double l2,
                  int batch);

  int dimension() const override {
    return static_cast<int>(features_.cols());
  }
  double Value(const Eigen::VectorXd& w) const override;
  Eigen::VectorXd Gradient(const Eigen::VectorXd& w) const override;
  Eigen::VectorXd StochasticGradient(const Eigen::VectorXd& w,
                                     Rng& rng) const override;
  double lipschitz() const override { return lipschitz_; }
  /// Zero: the mini-batch noise is bounded additively.
  double beta() const override { return 0.0; }
  /// mean_i ||x_i||^2 / batch, an upper bound on the mini-batch variance.
  double sigma_sq() const override { return sigma_sq_; }
  double f_inf() const override { return f_inf_; }
  nlohmann::json ToJson() const override;

  const Eigen::MatrixXd& features() const { return features_; }
  const Eigen::VectorXd& labels() const { return labels_; }
  const LogisticOptions& options() const { return options_; }

 private:
  void Initialize();
  double SampleLossGradientScale(int i, const Eigen::VectorXd& w) const;

  LogisticOptions options_;
  Eigen::MatrixXd features_;  // N x d
  Eigen::VectorXd labels_;
  double lipschitz_ = 0.0;
  double sigma_sq_ = 0.0;
  double f_inf_ = 0.0;
};

/// Parses {"type":"quadratic","A":[[...]],"b":[...],"sigma_sq":s,"beta":m}
/// or {"type":"logistic","n":N,"d":d,"seed":s,"l2":r,"batch":B}. Unknown keys
/// are rejected.
std::shared_ptr<const GradientOracle> OracleFromJson(const nlohmann::json& j);

/// Largest eigenvalue of a symmetric PSD matrix by power iteration, padded by
/// the final residual so the result does not undershoot.
double PowerIterationBound(const Eigen::MatrixXd& m, int max_iter = 10000);

}  // namespace coopsgd

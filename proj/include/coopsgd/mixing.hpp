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

#include <cstddef>
#include <span>
#include <utility>

#include <Eigen/Dense>
#include "json.hpp"

#include "coopsgd/rng.hpp"

namespace coopsgd {

/// Largest matrix dimension any mixing routine accepts.
inline constexpr int kMaxMixingDim = 256;

/// Tolerance for the symmetry and row-sum invariants.
inline constexpr double kStructureTol = 1e-12;

/// A symmetric real matrix whose rows sum to one, with its second-largest
/// absolute eigenvalue (zeta) cached at construction.
///
/// Instances are immutable. Construction rejects inputs that break the
/// structural invariants (square, symmetric, rows summing to one); it does
/// not reject zeta >= 1. Such matrices are representable and reported as
/// invalid by valid() and ValidateMixing().
class MixingMatrix {
 public:
  /// Throws InvalidDimension for empty/non-square/oversized input and
  /// ValidationError when symmetry or row sums are off by more than
  /// kStructureTol.
  explicit MixingMatrix(Eigen::MatrixXd entries);

  static MixingMatrix Identity(int n);

  const Eigen::MatrixXd& entries() const { return entries_; }
  int size() const { return static_cast<int>(entries_.rows()); }
  double zeta() const { return zeta_; }
  /// zeta < 1 - kStructureTol.
  bool valid() const { return valid_; }
  double operator()(int i, int j) const { return entries_(i, j); }

  bool operator==(const MixingMatrix& other) const {
    return entries_.rows() == other.entries_.rows() &&
           entries_.cols() == other.entries_.cols() &&
           entries_ == other.entries_;
  }

 private:
  Eigen::MatrixXd entries_;
  double zeta_ = 0.0;
  bool valid_ = false;
};

/// Returns `base` at every step k with k % tau == 0 and the identity
/// otherwise.
class MixingSchedule {
 public:
  MixingSchedule(MixingMatrix base, int tau);

  const MixingMatrix& At(long k) const {
    return IsSyncStep(k) ? base_ : identity_;
  }
  bool IsSyncStep(long k) const { return k % tau_ == 0; }
  int tau() const { return tau_; }
  const MixingMatrix& base() const { return base_; }

 private:
  MixingMatrix base_;
  MixingMatrix identity_;
  int tau_;
};

struct ValidationReport {
  double symmetry_defect = 0.0;  // max |W_ij - W_ji|
  double row_sum_defect = 0.0;   // max |sum_j W_ij - 1|
  double zeta = 0.0;             // NaN when the input is not symmetric
  bool valid = false;
};

// Constructors -------------------------------------------------------------

/// J_n = 11^T / n.
MixingMatrix MakeFullyConnected(int n);

/// 1/3 on the diagonal and on both ring neighbours. Requires m >= 3.
MixingMatrix MakeRing(int m);

/// (1 - zeta) J_n + zeta I_n: dense, with spectral gap parameter exactly zeta.
MixingMatrix MakeUniformZeta(int n, double zeta);

/// Elastic-averaging matrix with m workers and one auxiliary node:
/// [[(1-a) I, a 1], [a 1^T, 1 - m a]].
MixingMatrix MakeEasgd(int m, double alpha);

/// [[(1-a) W, a 1], [a 1^T, 1 - m a]] for an m x m mixing matrix W.
MixingMatrix MakeGeneralizedElastic(const MixingMatrix& w, double alpha);

/// Workers split into groups, each group coupled to its own auxiliary node
/// with the elastic pattern, auxiliaries mixed by `inter` (one row per
/// group). Node order: all workers group by group, then the auxiliaries.
///
/// The auxiliary block keeps symmetry for unequal group sizes by scaling
/// off-diagonal entries of `inter` by (1 - s_max a) and filling the
/// diagonal so rows sum to one. For equal sizes s this is (1 - s a) inter.
MixingMatrix MakeHierarchical(std::span<const int> group_sizes, double alpha,
                              const MixingMatrix& inter);

/// Random symmetric doubly-stochastic matrix with strictly positive entries
/// (hence zeta < 1), balanced by symmetric Sinkhorn scaling.
MixingMatrix MakeRandomDoublyStochastic(int n, Rng& rng);

// Spectral analysis --------------------------------------------------------

/// max |lambda_i| over all eigenvalues except the one carried by the all-ones
/// eigenvector. Throws ValidationError if `w` is not symmetric within
/// kStructureTol or not square.
double SpectralGap(const Eigen::MatrixXd& w);
inline double SpectralGap(const MixingMatrix& w) { return w.zeta(); }

/// ||W^j - J||_op via singular values, independent of the eigen route used
/// by SpectralGap.
double PowerDeviationNorm(const MixingMatrix& w, int j);

ValidationReport ValidateMixing(const Eigen::MatrixXd& w);
ValidationReport ValidateMixing(const MixingMatrix& w);

// Closed forms -------------------------------------------------------------

/// max{|1 - a|, |1 - (m+1) a|}.
double EasgdZeta(int m, double alpha);

struct AlphaChoice {
  double alpha;
  double zeta;
};

/// (2/(m+2), m/(m+2)).
AlphaChoice BestEasgdAlpha(int m);

/// max{|1 - a| zeta, |1 - (m+1) a|}.
double GeneralizedElasticZeta(double zeta, int m, double alpha);

/// ((1+zeta)/(m+1+zeta), m zeta/(m+1+zeta)).
AlphaChoice BestGeneralizedElasticAlpha(double zeta, int m);

// Serialization ------------------------------------------------------------

/// {"n": int, "entries": row-major array, "zeta": real}
nlohmann::json ToJson(const MixingMatrix& w);

/// Parses the format above. A present "zeta" must agree with the recomputed
/// value within 1e-9; unknown keys are rejected.
MixingMatrix MixingFromJson(const nlohmann::json& j);

}  // namespace coopsgd

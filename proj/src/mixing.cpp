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

#include "coopsgd/mixing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "coopsgd/error.hpp"

namespace coopsgd {
namespace {

void CheckDimension(int n, const char* what) {
  if (n < 1 || n > kMaxMixingDim) {
    throw InvalidDimension(std::string(what) + ": dimension " +
                           std::to_string(n) + " outside [1, " +
                           std::to_string(kMaxMixingDim) + "]");
  }
}

double SymmetryDefect(const Eigen::MatrixXd& w) {
  return (w - w.transpose()).cwiseAbs().maxCoeff();
}

double RowSumDefect(const Eigen::MatrixXd& w) {
  return (w.rowwise().sum().array() - 1.0).abs().maxCoeff();
}

double GapOfSymmetric(const Eigen::MatrixXd& w) {
  const Eigen::Index n = w.rows();
  if (n == 1) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(w);
  if (solver.info() != Eigen::Success) {
    throw ValidationError("symmetric eigensolve failed");
  }
  const Eigen::VectorXd ones =
      Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  // Index of the eigenvector carrying the consensus direction.
  Eigen::Index consensus = 0;
  (solver.eigenvectors().transpose() * ones).cwiseAbs().maxCoeff(&consensus);
  double zeta = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i != consensus) {
      zeta = std::max(zeta, std::abs(solver.eigenvalues()(i)));
    }
  }
  return zeta;
}

}  // namespace

MixingMatrix::MixingMatrix(Eigen::MatrixXd entries)
    : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols()) {
    throw InvalidDimension("mixing matrix must be square, got " +
                           std::to_string(entries_.rows()) + "x" +
                           std::to_string(entries_.cols()));
  }
  CheckDimension(static_cast<int>(entries_.rows()), "mixing matrix");
  if (!entries_.allFinite()) {
    throw ValidationError("mixing matrix has non-finite entries");
  }
  const double sym = SymmetryDefect(entries_);
  if (sym > kStructureTol) {
    throw ValidationError("mixing matrix is not symmetric (defect " +
                          std::to_string(sym) + ")");
  }
  const double rows = RowSumDefect(entries_);
  if (rows > kStructureTol) {
    throw ValidationError("mixing matrix rows do not sum to one (defect " +
                          std::to_string(rows) + ")");
  }
  zeta_ = GapOfSymmetric(entries_);
  valid_ = zeta_ < 1.0 - kStructureTol;
}

MixingMatrix MixingMatrix::Identity(int n) {
  CheckDimension(n, "identity");
  return MixingMatrix(Eigen::MatrixXd::Identity(n, n));
}

MixingSchedule::MixingSchedule(MixingMatrix base, int tau)
    : base_(std::move(base)),
      identity_(MixingMatrix::Identity(base_.size())),
      tau_(tau) {
  if (tau < 1) throw ConfigError("communication period tau must be >= 1");
}

MixingMatrix MakeFullyConnected(int n) {
  CheckDimension(n, "fully connected");
  return MixingMatrix(Eigen::MatrixXd::Constant(n, n, 1.0 / n));
}

MixingMatrix MakeRing(int m) {
  if (m < 3) throw InvalidDimension("ring needs at least 3 nodes");
  CheckDimension(m, "ring");
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(m, m);
  const double third = 1.0 / 3.0;
  for (int i = 0; i < m; ++i) {
    w(i, i) = third;
    w(i, (i + 1) % m) = third;
    w(i, (i + m - 1) % m) = third;
  }
  return MixingMatrix(std::move(w));
}

MixingMatrix MakeUniformZeta(int n, double zeta) {
  CheckDimension(n, "uniform-zeta");
  Eigen::MatrixXd w = Eigen::MatrixXd::Constant(n, n, (1.0 - zeta) / n);
  w.diagonal().array() += zeta;
  return MixingMatrix(std::move(w));
}

MixingMatrix MakeEasgd(int m, double alpha) {
  CheckDimension(m + 1, "easgd");
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(m + 1, m + 1);
  w.topLeftCorner(m, m).diagonal().setConstant(1.0 - alpha);
  w.col(m).head(m).setConstant(alpha);
  w.row(m).head(m).setConstant(alpha);
  w(m, m) = 1.0 - m * alpha;
  return MixingMatrix(std::move(w));
}

MixingMatrix MakeGeneralizedElastic(const MixingMatrix& base, double alpha) {
  if (!(alpha >= 0.0)) {
    throw ConfigError("elastic coupling alpha must be >= 0");
  }
  const int m = base.size();
  CheckDimension(m + 1, "generalized elastic");
  Eigen::MatrixXd w(m + 1, m + 1);
  w.topLeftCorner(m, m) = (1.0 - alpha) * base.entries();
  w.col(m).head(m).setConstant(alpha);
  w.row(m).head(m).setConstant(alpha);
  w(m, m) = 1.0 - m * alpha;
  return MixingMatrix(std::move(w));
}

MixingMatrix MakeHierarchical(std::span<const int> group_sizes, double alpha,
                              const MixingMatrix& inter) {
  const int groups = static_cast<int>(group_sizes.size());
  if (groups == 0) throw InvalidDimension("hierarchical: no groups");
  if (inter.size() != groups) {
    throw InvalidDimension("hierarchical: inter-group matrix has size " +
                           std::to_string(inter.size()) + " for " +
                           std::to_string(groups) + " groups");
  }
  if (!(alpha >= 0.0)) throw ConfigError("hierarchical: alpha must be >= 0");
  if (std::any_of(group_sizes.begin(), group_sizes.end(),
                  [](int s) { return s < 1; })) {
    throw InvalidDimension("hierarchical: group sizes must be positive");
  }
  const int workers =
      std::accumulate(group_sizes.begin(), group_sizes.end(), 0);
  const int n = workers + groups;
  CheckDimension(n, "hierarchical");
  const int largest =
      *std::max_element(group_sizes.begin(), group_sizes.end());

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  int next = 0;
  for (int g = 0; g < groups; ++g) {
    const int aux = workers + g;
    for (int s = 0; s < group_sizes[g]; ++s, ++next) {
      w(next, next) = 1.0 - alpha;
      w(next, aux) = alpha;
      w(aux, next) = alpha;
    }
  }
  const double scale = 1.0 - largest * alpha;
  for (int g = 0; g < groups; ++g) {
    double off = 0.0;
    for (int h = 0; h < groups; ++h) {
      if (h == g) continue;
      w(workers + g, workers + h) = scale * inter(g, h);
      off += scale * inter(g, h);
    }
    w(workers + g, workers + g) = 1.0 - group_sizes[g] * alpha - off;
  }
  return MixingMatrix(std::move(w));
}

MixingMatrix MakeRandomDoublyStochastic(int n, Rng& rng) {
  CheckDimension(n, "random doubly stochastic");
  std::uniform_real_distribution<double> weight(0.05, 1.0);
  std::bernoulli_distribution keep(0.5);
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    s(i, i) = weight(rng);
    for (int j = i + 1; j < n; ++j) {
      const bool ring_edge = (j == i + 1) || (i == 0 && j == n - 1);
      if (ring_edge || keep(rng)) s(i, j) = s(j, i) = weight(rng);
    }
  }
  // Symmetric Sinkhorn: find x > 0 with diag(x) S diag(x) doubly stochastic.
  Eigen::VectorXd x = Eigen::VectorXd::Ones(n);
  Eigen::MatrixXd w = s;
  for (int iter = 0; iter < 100000; ++iter) {
    x = (x.array() / (s * x).array()).sqrt();
    w = x.asDiagonal() * s * x.asDiagonal();
    w = 0.5 * (w + w.transpose()).eval();
    if (RowSumDefect(w) < 1e-14) break;
  }
  // Absorb the last rounding residue into the diagonal.
  w.diagonal().array() += 1.0 - w.rowwise().sum().array();
  return MixingMatrix(std::move(w));
}

double SpectralGap(const Eigen::MatrixXd& w) {
  if (w.rows() != w.cols() || w.rows() == 0) {
    throw ValidationError("spectral gap needs a non-empty square matrix");
  }
  CheckDimension(static_cast<int>(w.rows()), "spectral gap");
  const double sym = SymmetryDefect(w);
  if (!(sym <= kStructureTol)) {
    throw ValidationError("spectral gap needs a symmetric matrix (defect " +
                          std::to_string(sym) + ")");
  }
  return GapOfSymmetric(w);
}

double PowerDeviationNorm(const MixingMatrix& w, int j) {
  if (j < 0) throw ConfigError("power must be nonnegative");
  const int n = w.size();
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < j; ++i) power = power * w.entries();
  power.array() -= 1.0 / n;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(power);
  return svd.singularValues()(0);
}

ValidationReport ValidateMixing(const Eigen::MatrixXd& w) {
  ValidationReport report;
  if (w.rows() != w.cols() || w.rows() == 0 || w.rows() > kMaxMixingDim ||
      !w.allFinite()) {
    report.symmetry_defect = std::numeric_limits<double>::infinity();
    report.row_sum_defect = std::numeric_limits<double>::infinity();
    report.zeta = std::numeric_limits<double>::quiet_NaN();
    return report;
  }
  report.symmetry_defect = SymmetryDefect(w);
  report.row_sum_defect = RowSumDefect(w);
  report.zeta = report.symmetry_defect <= kStructureTol
                    ? GapOfSymmetric(w)
                    : std::numeric_limits<double>::quiet_NaN();
  report.valid = report.symmetry_defect < kStructureTol &&
                 report.row_sum_defect < kStructureTol &&
                 report.zeta < 1.0 - kStructureTol;
  return report;
}

ValidationReport ValidateMixing(const MixingMatrix& w) {
  ValidationReport report;
  report.symmetry_defect = SymmetryDefect(w.entries());
  report.row_sum_defect = RowSumDefect(w.entries());
  report.zeta = w.zeta();
  report.valid = report.symmetry_defect < kStructureTol &&
                 report.row_sum_defect < kStructureTol && w.valid();
  return report;
}

double EasgdZeta(int m, double alpha) {
  return std::max(std::abs(1.0 - alpha), std::abs(1.0 - (m + 1) * alpha));
}

AlphaChoice BestEasgdAlpha(int m) {
  if (m < 1) throw InvalidDimension("easgd needs at least one worker");
  return {2.0 / (m + 2), static_cast<double>(m) / (m + 2)};
}

double GeneralizedElasticZeta(double zeta, int m, double alpha) {
  return std::max(std::abs(1.0 - alpha) * zeta,
                  std::abs(1.0 - (m + 1) * alpha));
}

AlphaChoice BestGeneralizedElasticAlpha(double zeta, int m) {
  if (m < 1) throw InvalidDimension("elastic averaging needs a worker");
  return {(1.0 + zeta) / (m + 1 + zeta), m * zeta / (m + 1 + zeta)};
}

nlohmann::json ToJson(const MixingMatrix& w) {
  const int n = w.size();
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) flat.push_back(w(i, j));
  }
  return {{"n", n}, {"entries", flat}, {"zeta", w.zeta()}};
}

MixingMatrix MixingFromJson(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("mixing matrix must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key != "n" && key != "entries" && key != "zeta") {
      throw ConfigError("unknown field in mixing matrix: " + key);
    }
  }
  if (!j.contains("n") || !j.contains("entries")) {
    throw ConfigError("mixing matrix needs \"n\" and \"entries\"");
  }
  const int n = j.at("n").get<int>();
  CheckDimension(n, "mixing matrix JSON");
  const auto flat = j.at("entries").get<std::vector<double>>();
  if (flat.size() != static_cast<std::size_t>(n) * n) {
    throw InvalidDimension("mixing matrix JSON: expected " +
                           std::to_string(n * n) + " entries, got " +
                           std::to_string(flat.size()));
  }
  Eigen::MatrixXd w(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) w(r, c) = flat[static_cast<std::size_t>(r) * n + c];
  }
  MixingMatrix parsed(std::move(w));
  if (j.contains("zeta") && !j.at("zeta").is_null()) {
    const double stated = j.at("zeta").get<double>();
    if (std::abs(stated - parsed.zeta()) > 1e-9) {
      throw ValidationError("mixing matrix JSON: stated zeta " +
                            std::to_string(stated) + " but entries give " +
                            std::to_string(parsed.zeta()));
    }
  }
  return parsed;
}

}  // namespace coopsgd

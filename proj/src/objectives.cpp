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

#include "coopsgd/objectives.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "coopsgd/error.hpp"

namespace coopsgd {
namespace {

void CheckPoint(const Eigen::VectorXd& x, int dimension) {
  if (x.size() != dimension) {
    throw InvalidDimension("point has dimension " + std::to_string(x.size()) +
                           ", oracle expects " + std::to_string(dimension));
  }
  if (!x.allFinite()) throw ValidationError("point has non-finite entries");
}

// log(1 + exp(t)) without overflow.
double Softplus(double t) {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

double Sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

void RejectUnknown(const nlohmann::json& j,
                   std::initializer_list<const char*> allowed,
                   const char* where) {
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) {
      throw ConfigError(std::string("unknown field in ") + where + ": " + key);
    }
  }
}

}  // namespace

double PowerIterationBound(const Eigen::MatrixXd& m, int max_iter) {
  const Eigen::Index n = m.rows();
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n) / std::sqrt(double(n));
  // Tilt the start so it is not orthogonal to the top eigenvector of a
  // structured matrix.
  for (Eigen::Index i = 0; i < n; ++i) v(i) += 1e-3 * double(i + 1) / double(n);
  v.normalize();
  double rho = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd next = m * v;
    const double norm = next.norm();
    if (norm == 0.0) return 0.0;
    next /= norm;
    const double next_rho = next.dot(m * next);
    const bool done = std::abs(next_rho - rho) <= 1e-15 * std::abs(next_rho);
    v = std::move(next);
    rho = next_rho;
    if (done) break;
  }
  const double residual = (m * v - rho * v).norm();
  return rho * (1.0 + 1e-12) + residual;
}

// --- Quadratic --------------------------------------------------------------

QuadraticProblem::QuadraticProblem(Eigen::MatrixXd a, Eigen::VectorXd b,
                                   double sigma_sq, double beta)
    : a_(std::move(a)), b_(std::move(b)), sigma_sq_(sigma_sq), beta_(beta) {
  const Eigen::Index d = b_.size();
  if (d == 0 || a_.rows() != d || a_.cols() != d) {
    throw InvalidDimension("quadratic: A must be d x d with d = size(b) > 0");
  }
  if (!a_.allFinite() || !b_.allFinite()) {
    throw ValidationError("quadratic: non-finite A or b");
  }
  if ((a_ - a_.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw ValidationError("quadratic: A must be symmetric");
  }
  if (!(sigma_sq_ >= 0.0) || !(beta_ >= 0.0)) {
    throw ValidationError("quadratic: sigma_sq and beta must be >= 0");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a_);
  const Eigen::VectorXd& eig = solver.eigenvalues();
  const double top = eig.maxCoeff();
  if (eig.minCoeff() < -1e-12 * std::max(1.0, top)) {
    throw ValidationError("quadratic: A must be positive semidefinite");
  }
  lipschitz_ = std::max(top, 0.0);
  // Pseudo-inverse solution of A x = b.
  const double cutoff = 1e-12 * std::max(1.0, top);
  const Eigen::MatrixXd& q = solver.eigenvectors();
  Eigen::VectorXd coeff = q.transpose() * b_;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (eig(i) > cutoff) {
      coeff(i) /= eig(i);
    } else if (std::abs(coeff(i)) > 1e-10 * std::max(1.0, b_.norm())) {
      throw ValidationError("quadratic: b outside range(A), F is unbounded");
    } else {
      coeff(i) = 0.0;
    }
  }
  minimizer_ = q * coeff;
  f_inf_ = Value(minimizer_);
}

double QuadraticProblem::Value(const Eigen::VectorXd& x) const {
  CheckPoint(x, dimension());
  return 0.5 * x.dot(a_ * x) - b_.dot(x);
}

Eigen::VectorXd QuadraticProblem::Gradient(const Eigen::VectorXd& x) const {
  CheckPoint(x, dimension());
  return a_ * x - b_;
}

Eigen::VectorXd QuadraticProblem::StochasticGradient(const Eigen::VectorXd& x,
                                                     Rng& rng) const {
  Eigen::VectorXd g = Gradient(x);
  if (beta_ > 0.0) {
    std::normal_distribution<double> unit(0.0, 1.0);
    g *= 1.0 + std::sqrt(beta_) * unit(rng);
  }
  if (sigma_sq_ > 0.0) {
    std::normal_distribution<double> noise(
        0.0, std::sqrt(sigma_sq_ / static_cast<double>(g.size())));
    for (Eigen::Index i = 0; i < g.size(); ++i) g(i) += noise(rng);
  }
  return g;
}

nlohmann::json QuadraticProblem::ToJson() const {
  std::vector<std::vector<double>> rows(a_.rows());
  for (Eigen::Index i = 0; i < a_.rows(); ++i) {
    for (Eigen::Index j = 0; j < a_.cols(); ++j) rows[i].push_back(a_(i, j));
  }
  return {{"type", "quadratic"},
          {"A", rows},
          {"b", std::vector<double>(b_.data(), b_.data() + b_.size())},
          {"sigma_sq", sigma_sq_},
          {"beta", beta_}};
}

// --- Logistic ---------------------------------------------------------------

LogisticProblem::LogisticProblem(const LogisticOptions& options)
    : options_(options) {
  if (options.samples < 1 || options.dimension < 1) {
    throw InvalidDimension("logistic: need n >= 1 samples and d >= 1");
  }
  Rng rng = MakeStream(options.seed, kDataStream);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution flip(0.1);
  Eigen::VectorXd planted(options.dimension);
  for (auto& w : planted) w = normal(rng);
  features_.resize(options.samples, options.dimension);
  labels_.resize(options.samples);
  for (int i = 0; i < options.samples; ++i) {
    for (int j = 0; j < options.dimension; ++j) features_(i, j) = normal(rng);
    double label = features_.row(i).dot(planted) >= 0.0 ? 1.0 : -1.0;
    if (flip(rng)) label = -label;
    labels_(i) = label;
  }
  Initialize();
}

LogisticProblem::LogisticProblem(Eigen::MatrixXd features,
                                 Eigen::VectorXd labels, double l2, int batch)
    : features_(std::move(features)), labels_(std::move(labels)) {
  options_.samples = static_cast<int>(features_.rows());
  options_.dimension = static_cast<int>(features_.cols());
  options_.l2 = l2;
  options_.batch = batch;
  if (features_.rows() < 1 || features_.cols() < 1 ||
      labels_.size() != features_.rows()) {
    throw InvalidDimension("logistic: features must be N x d, labels N");
  }
  for (double y : labels_) {
    if (y != 1.0 && y != -1.0) {
      throw ValidationError("logistic: labels must be +1 or -1");
    }
  }
  Initialize();
}

void LogisticProblem::Initialize() {
  if (options_.batch < 1) throw ConfigError("logistic: batch must be >= 1");
  if (!(options_.l2 >= 0.0)) throw ConfigError("logistic: l2 must be >= 0");
  const double n = static_cast<double>(features_.rows());
  Eigen::MatrixXd curvature = features_.transpose() * features_ / (4.0 * n);
  lipschitz_ = PowerIterationBound(curvature) + options_.l2;
  sigma_sq_ = features_.rowwise().squaredNorm().mean() / options_.batch;

  // F_inf by full-gradient descent with step 1/L.
  Eigen::VectorXd w = Eigen::VectorXd::Zero(features_.cols());
  const double step = 1.0 / lipschitz_;
  for (int it = 0; it < 500000; ++it) {
    const Eigen::VectorXd g = Gradient(w);
    if (g.norm() < 1e-10) break;
    w -= step * g;
  }
  f_inf_ = Value(w);
}

double LogisticProblem::SampleLossGradientScale(
    int i, const Eigen::VectorXd& w) const {
  const double margin = labels_(i) * features_.row(i).dot(w);
  return -labels_(i) * Sigmoid(-margin);
}

double LogisticProblem::Value(const Eigen::VectorXd& w) const {
  CheckPoint(w, dimension());
  const Eigen::VectorXd margins =
      labels_.cwiseProduct(features_ * w);
  double loss = 0.0;
  for (double t : margins) loss += Softplus(-t);
  return loss / static_cast<double>(features_.rows()) +
         0.5 * options_.l2 * w.squaredNorm();
}

Eigen::VectorXd LogisticProblem::Gradient(const Eigen::VectorXd& w) const {
  CheckPoint(w, dimension());
  const Eigen::VectorXd margins = labels_.cwiseProduct(features_ * w);
  Eigen::VectorXd scale(margins.size());
  for (Eigen::Index i = 0; i < margins.size(); ++i) {
    scale(i) = -labels_(i) * Sigmoid(-margins(i));
  }
  return features_.transpose() * scale /
             static_cast<double>(features_.rows()) +
         options_.l2 * w;
}

Eigen::VectorXd LogisticProblem::StochasticGradient(const Eigen::VectorXd& w,
                                                    Rng& rng) const {
  CheckPoint(w, dimension());
  std::uniform_int_distribution<int> pick(0,
                                          static_cast<int>(features_.rows()) - 1);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(w.size());
  for (int b = 0; b < options_.batch; ++b) {
    const int i = pick(rng);
    g += SampleLossGradientScale(i, w) * features_.row(i).transpose();
  }
  g /= static_cast<double>(options_.batch);
  g += options_.l2 * w;
  return g;
}

nlohmann::json LogisticProblem::ToJson() const {
  return {{"type", "logistic"},          {"n", options_.samples},
          {"d", options_.dimension},     {"seed", options_.seed},
          {"l2", options_.l2},           {"batch", options_.batch}};
}

std::shared_ptr<const GradientOracle> OracleFromJson(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type")) {
    throw ConfigError("problem must be an object with a \"type\" field");
  }
  const auto type = j.at("type").get<std::string>();
  if (type == "quadratic") {
    RejectUnknown(j, {"type", "A", "b", "sigma_sq", "beta"}, "problem");
    if (!j.contains("A") || !j.contains("b")) {
      throw ConfigError("quadratic problem needs \"A\" and \"b\"");
    }
    const auto rows = j.at("A").get<std::vector<std::vector<double>>>();
    const auto b = j.at("b").get<std::vector<double>>();
    const Eigen::Index d = static_cast<Eigen::Index>(b.size());
    if (static_cast<Eigen::Index>(rows.size()) != d) {
      throw InvalidDimension("quadratic: A has " + std::to_string(rows.size()) +
                             " rows, b has " + std::to_string(d) + " entries");
    }
    Eigen::MatrixXd a(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      if (static_cast<Eigen::Index>(rows[i].size()) != d) {
        throw InvalidDimension("quadratic: A is not square");
      }
      for (Eigen::Index k = 0; k < d; ++k) a(i, k) = rows[i][k];
    }
    return std::make_shared<QuadraticProblem>(
        std::move(a), Eigen::Map<const Eigen::VectorXd>(b.data(), d),
        j.value("sigma_sq", 0.0), j.value("beta", 0.0));
  }
  if (type == "logistic") {
    RejectUnknown(j, {"type", "n", "d", "seed", "l2", "batch"}, "problem");
    LogisticOptions options;
    options.samples = j.value("n", options.samples);
    options.dimension = j.value("d", options.dimension);
    options.seed = j.value("seed", options.seed);
    options.l2 = j.value("l2", options.l2);
    options.batch = j.value("batch", options.batch);
    return std::make_shared<LogisticProblem>(options);
  }
  throw ConfigError("unknown problem type: " + type);
}

}  // namespace coopsgd

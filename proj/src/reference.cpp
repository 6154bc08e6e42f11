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

#include <algorithm>
#include <cstddef>
#include <string>

#include "coopsgd/engine.hpp"
#include "coopsgd/error.hpp"

namespace coopsgd::reference {
namespace {

void CheckShapes(const std::vector<Eigen::VectorXd>& models,
                 std::span<const Eigen::VectorXd> grads) {
  if (models.empty() || models.size() != grads.size()) {
    throw InvalidDimension("reference step: need one gradient per worker");
  }
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (models[i].size() != models[0].size() ||
        grads[i].size() != models[0].size()) {
      throw InvalidDimension("reference step: inconsistent dimensions");
    }
  }
}

}  // namespace

void FullSyncStep(std::vector<Eigen::VectorXd>& models,
                  std::span<const Eigen::VectorXd> grads, double eta) {
  CheckShapes(models, grads);
  const std::size_t m = models.size();
  Eigen::VectorXd average = Eigen::VectorXd::Zero(models[0].size());
  for (const auto& g : grads) average += g;
  average /= static_cast<double>(m);
  const Eigen::VectorXd x = models[0] - eta * average;
  for (auto& model : models) model = x;
}

void PeriodicAveragingStep(std::vector<Eigen::VectorXd>& models,
                           std::span<const Eigen::VectorXd> grads, double eta,
                           long k, int tau) {
  CheckShapes(models, grads);
  if (tau < 1) throw ConfigError("reference step: tau must be >= 1");
  const std::size_t m = models.size();
  if (k % tau == 0) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(models[0].size());
    for (std::size_t j = 0; j < m; ++j) sum += models[j] - eta * grads[j];
    const Eigen::VectorXd average = sum / static_cast<double>(m);
    for (auto& model : models) model = average;
  } else {
    for (std::size_t i = 0; i < m; ++i) models[i] -= eta * grads[i];
  }
}

void ElasticAveragingStep(std::vector<Eigen::VectorXd>& models,
                          Eigen::VectorXd& center,
                          std::span<const Eigen::VectorXd> grads, double eta,
                          double alpha) {
  CheckShapes(models, grads);
  if (center.size() != models[0].size()) {
    throw InvalidDimension("reference step: center has wrong dimension");
  }
  const std::size_t m = models.size();
  Eigen::VectorXd xbar = Eigen::VectorXd::Zero(center.size());
  for (const auto& x : models) xbar += x;
  xbar /= static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    models[i] = models[i] - eta * grads[i] - alpha * (models[i] - center);
  }
  const double pull = static_cast<double>(m) * alpha;
  center = (1.0 - pull) * center + pull * xbar;
}

void DecentralizedStep(std::vector<Eigen::VectorXd>& models,
                       std::span<const Eigen::VectorXd> grads, double eta,
                       const Eigen::MatrixXd& w) {
  CheckShapes(models, grads);
  const Eigen::Index m = static_cast<Eigen::Index>(models.size());
  if (w.rows() != m || w.cols() != m) {
    throw InvalidDimension("reference step: W must be m x m");
  }
  std::vector<Eigen::VectorXd> next(models.size());
  for (Eigen::Index i = 0; i < m; ++i) {
    Eigen::VectorXd mixed = Eigen::VectorXd::Zero(models[0].size());
    for (Eigen::Index j = 0; j < m; ++j) mixed += w(j, i) * models[j];
    next[i] = mixed - eta * grads[i];
  }
  models = std::move(next);
}

double MaxTrajectoryDeviation(Algorithm algorithm,
                              const AlgorithmConfig& config,
                              std::shared_ptr<const GradientOracle> oracle,
                              double alpha) {
  Simulator sim(config, oracle);
  const AlgorithmConfig& cfg = sim.config();
  const int m = cfg.workers;
  if (algorithm == Algorithm::kElastic) {
    if (cfg.auxiliaries != 1) {
      throw ConfigError("elastic reference needs exactly one auxiliary");
    }
  } else if (cfg.auxiliaries != 0) {
    throw ConfigError("reference algorithm has no auxiliary variables");
  }

  std::vector<Eigen::VectorXd> models(m, cfg.x0);
  Eigen::VectorXd center = cfg.x0;
  std::vector<Rng> streams;
  for (int i = 0; i < m; ++i) {
    streams.push_back(MakeStream(cfg.seed, static_cast<std::uint64_t>(i)));
  }
  std::vector<Eigen::VectorXd> grads(m);

  double worst = 0.0;
  for (long k = 1; k <= cfg.iterations; ++k) {
    for (int i = 0; i < m; ++i) {
      grads[i] = oracle->StochasticGradient(models[i], streams[i]);
    }
    switch (algorithm) {
      case Algorithm::kFullSync:
        FullSyncStep(models, grads, cfg.eta);
        break;
      case Algorithm::kPeriodic:
        PeriodicAveragingStep(models, grads, cfg.eta, k, cfg.tau);
        break;
      case Algorithm::kElastic:
        ElasticAveragingStep(models, center, grads, cfg.eta, alpha);
        break;
      case Algorithm::kDecentralized:
        DecentralizedStep(models, grads, cfg.eta, cfg.mixing.entries());
        break;
    }
    if (!sim.Step()) {
      throw ValidationError("framework run diverged at step " +
                            std::to_string(k));
    }
    const Eigen::MatrixXd& x = sim.params().x;
    for (int i = 0; i < m; ++i) {
      worst = std::max(worst, (x.col(i) - models[i]).cwiseAbs().maxCoeff());
    }
    if (algorithm == Algorithm::kElastic) {
      worst = std::max(worst, (x.col(m) - center).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

}  // namespace coopsgd::reference

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

#include "coopsgd/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "coopsgd/error.hpp"

namespace coopsgd {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool IsFinite(const TraceRecord& r) {
  return std::isfinite(r.loss) && std::isfinite(r.grad_norm_sq) &&
         std::isfinite(r.network_error) && std::isfinite(r.worker_loss);
}

}  // namespace

ParamMatrix ParamMatrix::Uniform(const Eigen::VectorXd& x0, int workers,
                                 int auxiliaries) {
  ParamMatrix p;
  p.workers = workers;
  p.auxiliaries = auxiliaries;
  p.x = x0.replicate(1, workers + auxiliaries);
  return p;
}

void ValidateConfig(const AlgorithmConfig& config) {
  if (config.workers < 1) throw ConfigError("need at least one worker");
  if (config.auxiliaries < 0) {
    throw ConfigError("auxiliary count must be nonnegative");
  }
  if (config.tau < 1) throw ConfigError("tau must be >= 1");
  if (config.iterations < 1) throw ConfigError("K must be >= 1");
  if (config.iterations % config.tau != 0) {
    const long lower = config.iterations / config.tau * config.tau;
    const long upper = lower + config.tau;
    const long nearest =
        (lower > 0 && config.iterations - lower <= upper - config.iterations)
            ? lower
            : upper;
    throw ConfigError("K = " + std::to_string(config.iterations) +
                      " is not a multiple of tau = " +
                      std::to_string(config.tau) + "; nearest valid K is " +
                      std::to_string(nearest));
  }
  if (config.mixing.size() != config.workers + config.auxiliaries) {
    throw ConfigError("mixing matrix has size " +
                      std::to_string(config.mixing.size()) + " but m + v = " +
                      std::to_string(config.workers + config.auxiliaries));
  }
  if (!(config.eta > 0.0) || !std::isfinite(config.eta)) {
    throw ConfigError("learning rate must be positive and finite");
  }
}

ParamMatrix CoopStep(const ParamMatrix& params, const MixingMatrix& mixing,
                     double eta, const Eigen::MatrixXd& g, UpdateRule rule) {
  const int n = params.nodes();
  if (params.x.cols() != n || g.rows() != params.x.rows() || g.cols() != n ||
      mixing.size() != n) {
    throw InvalidDimension("coop step: X, G and W shapes disagree");
  }
  if (params.auxiliaries > 0 &&
      g.rightCols(params.auxiliaries).cwiseAbs().maxCoeff() != 0.0) {
    throw ValidationError("coop step: auxiliary gradient columns must be 0");
  }
  ParamMatrix next;
  next.workers = params.workers;
  next.auxiliaries = params.auxiliaries;
  if (rule == UpdateRule::kPostMultiply) {
    next.x.noalias() = (params.x - eta * g) * mixing.entries();
  } else {
    next.x.noalias() = params.x * mixing.entries();
    next.x -= eta * g;
  }
  return next;
}

Eigen::VectorXd AveragedModel(const ParamMatrix& params) {
  return params.x.rowwise().mean();
}

double EffectiveLearningRate(double eta, int workers, int auxiliaries) {
  return workers * eta / (workers + auxiliaries);
}

double NetworkError(const ParamMatrix& params) {
  const Eigen::VectorXd mean = AveragedModel(params);
  return (params.x.colwise() - mean).squaredNorm();
}

Simulator::Simulator(AlgorithmConfig config,
                     std::shared_ptr<const GradientOracle> oracle)
    : config_(std::move(config)),
      oracle_(std::move(oracle)),
      schedule_(config_.mixing, config_.tau) {
  ValidateConfig(config_);
  if (!oracle_) throw ConfigError("simulator needs an oracle");
  const int d = oracle_->dimension();
  if (config_.x0.size() == 0) config_.x0 = Eigen::VectorXd::Zero(d);
  if (config_.x0.size() != d) {
    throw InvalidDimension("x0 has dimension " +
                           std::to_string(config_.x0.size()) +
                           ", problem has " + std::to_string(d));
  }
  streams_.reserve(config_.workers);
  for (int i = 0; i < config_.workers; ++i) {
    streams_.push_back(MakeStream(config_.seed, static_cast<std::uint64_t>(i)));
  }
  params_ = ParamMatrix::Uniform(config_.x0, config_.workers,
                                 config_.auxiliaries);
  gradients_ = Eigen::MatrixXd::Zero(d, params_.nodes());
}

bool Simulator::Step() {
  if (diverged_) return false;
  const int m = config_.workers;
  for (int i = 0; i < m; ++i) {
    gradients_.col(i) =
        oracle_->StochasticGradient(params_.x.col(i), streams_[i]);
  }
  const long k = iteration_ + 1;
  ParamMatrix next = CoopStep(params_, schedule_.At(k), config_.eta,
                              gradients_, config_.rule);
  if (!next.x.allFinite()) {
    diverged_ = true;
    return false;
  }
  // The averaged model must follow perturbed SGD with the effective rate.
  const double eta_tilde =
      EffectiveLearningRate(config_.eta, m, config_.auxiliaries);
  const Eigen::VectorXd before = AveragedModel(params_);
  const Eigen::VectorXd mean_grad = gradients_.leftCols(m).rowwise().mean();
  const Eigen::VectorXd predicted = before - eta_tilde * mean_grad;
  const Eigen::VectorXd after = AveragedModel(next);
  const double scale =
      std::max({1.0, before.cwiseAbs().maxCoeff(),
                eta_tilde * mean_grad.cwiseAbs().maxCoeff(),
                params_.x.cwiseAbs().maxCoeff()});
  max_recursion_defect_ = std::max(
      max_recursion_defect_, (after - predicted).cwiseAbs().maxCoeff() / scale);

  params_ = std::move(next);
  iteration_ = k;
  return true;
}

TraceRecord Simulator::Observe() const {
  TraceRecord r;
  r.k = iteration_;
  const Eigen::VectorXd mean = AveragedModel(params_);
  if (!mean.allFinite()) {
    r.loss = r.grad_norm_sq = r.network_error = r.worker_loss = kNaN;
    return r;
  }
  r.loss = oracle_->Value(mean);
  r.grad_norm_sq = oracle_->Gradient(mean).squaredNorm();
  r.network_error = (params_.x.colwise() - mean).squaredNorm();
  double workers = 0.0;
  for (int i = 0; i < config_.workers; ++i) {
    workers += oracle_->Value(params_.x.col(i));
  }
  r.worker_loss = workers / config_.workers;
  return r;
}

RunTrace Run(const AlgorithmConfig& config,
             std::shared_ptr<const GradientOracle> oracle) {
  Simulator sim(config, std::move(oracle));
  RunTrace trace;
  trace.iterations = config.iterations;
  trace.records.reserve(static_cast<std::size_t>(config.iterations) + 1);
  trace.records.push_back(sim.Observe());
  for (long k = 1; k <= config.iterations; ++k) {
    if (!sim.Step()) break;
    TraceRecord r = sim.Observe();
    if (!IsFinite(r)) {
      trace.diverged = true;
      break;
    }
    trace.records.push_back(r);
  }
  trace.diverged = trace.diverged || sim.diverged();
  trace.max_recursion_defect = sim.max_recursion_defect();
  if (trace.diverged) {
    trace.mean_grad_norm_sq = kNaN;
    trace.final_loss = kNaN;
  } else {
    double sum = 0.0;
    for (long k = 0; k < config.iterations; ++k) {
      sum += trace.records[static_cast<std::size_t>(k)].grad_norm_sq;
    }
    trace.mean_grad_norm_sq = sum / static_cast<double>(config.iterations);
    trace.final_loss = trace.records.back().loss;
  }
  return trace;
}

RunTrace AverageTraces(std::span<const RunTrace> traces) {
  RunTrace mean;
  std::size_t used = 0;
  for (const RunTrace& t : traces) {
    if (t.diverged) continue;
    if (used == 0) {
      mean.records = t.records;
      mean.iterations = t.iterations;
      mean.mean_grad_norm_sq = t.mean_grad_norm_sq;
      mean.final_loss = t.final_loss;
      mean.max_recursion_defect = t.max_recursion_defect;
    } else {
      if (t.records.size() != mean.records.size()) {
        throw InvalidDimension("cannot average traces of different lengths");
      }
      for (std::size_t i = 0; i < t.records.size(); ++i) {
        TraceRecord& acc = mean.records[i];
        const TraceRecord& r = t.records[i];
        acc.loss += r.loss;
        acc.grad_norm_sq += r.grad_norm_sq;
        acc.network_error += r.network_error;
        acc.worker_loss += r.worker_loss;
        acc.wall_clock_s += r.wall_clock_s;
      }
      mean.mean_grad_norm_sq += t.mean_grad_norm_sq;
      mean.final_loss += t.final_loss;
      mean.max_recursion_defect =
          std::max(mean.max_recursion_defect, t.max_recursion_defect);
    }
    ++used;
  }
  if (used == 0) {
    mean.diverged = true;
    mean.mean_grad_norm_sq = kNaN;
    mean.final_loss = kNaN;
    if (!traces.empty()) mean.iterations = traces.front().iterations;
    return mean;
  }
  const double inv = 1.0 / static_cast<double>(used);
  for (TraceRecord& r : mean.records) {
    r.loss *= inv;
    r.grad_norm_sq *= inv;
    r.network_error *= inv;
    r.worker_loss *= inv;
    r.wall_clock_s *= inv;
  }
  mean.mean_grad_norm_sq *= inv;
  mean.final_loss *= inv;
  return mean;
}

double LongRunMean(const RunTrace& trace, double TraceRecord::*field,
                   double fraction) {
  if (trace.records.empty()) return kNaN;
  const std::size_t n = trace.records.size();
  const std::size_t window = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(fraction * double(n))), 1, n);
  double sum = 0.0;
  for (std::size_t i = n - window; i < n; ++i) sum += trace.records[i].*field;
  return sum / static_cast<double>(window);
}

}  // namespace coopsgd

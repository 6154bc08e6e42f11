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
#include <random>

#include "coopsgd/error.hpp"
#include "coopsgd/objectives.hpp"
#include "coopsgd/rng.hpp"

using namespace coopsgd;

namespace {

Eigen::VectorXd RandomPoint(int d, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::VectorXd x(d);
  for (int i = 0; i < d; ++i) x(i) = n(rng);
  return x;
}

// Central differences of Value, compared against Gradient.
double FiniteDifferenceError(const GradientOracle& f, const Eigen::VectorXd& x) {
  const double h = 1e-6;
  double worst = 0.0;
  for (int i = 0; i < f.dimension(); ++i) {
    Eigen::VectorXd up = x, down = x;
    up(i) += h;
    down(i) -= h;
    const double fd = (f.Value(up) - f.Value(down)) / (2 * h);
    worst = std::max(worst, std::abs(fd - f.Gradient(x)(i)));
  }
  return worst;
}

QuadraticProblem DiagonalQuadratic(double sigma_sq, double beta) {
  Eigen::VectorXd diag(10);
  for (int i = 0; i < 10; ++i) diag(i) = 0.1 * (i + 1);
  const Eigen::MatrixXd a = diag.asDiagonal();
  return QuadraticProblem(a, a * Eigen::VectorXd::Ones(10), sigma_sq, beta);
}

}  // namespace

TEST_CASE("quadratic constants are exact") {
  const QuadraticProblem q = DiagonalQuadratic(1.0, 0.0);
  CHECK(q.lipschitz() == doctest::Approx(1.0).epsilon(1e-12));
  // Minimizer is the all-ones vector; F_inf = -1/2 sum lambda_i = -2.75.
  CHECK((q.minimizer() - Eigen::VectorXd::Ones(10)).norm() < 1e-12);
  CHECK(q.f_inf() == doctest::Approx(-2.75).epsilon(1e-14));
  CHECK(q.Gradient(q.minimizer()).norm() < 1e-12);
}

TEST_CASE("quadratic gradient matches finite differences") {
  Rng rng = MakeStream(3, 0);
  Eigen::MatrixXd b = Eigen::MatrixXd::Random(6, 6);
  const Eigen::MatrixXd a = b * b.transpose();
  const QuadraticProblem q(a, a * RandomPoint(6, rng), 0.0);
  for (int t = 0; t < 5; ++t) {
    CHECK(FiniteDifferenceError(q, RandomPoint(6, rng)) < 1e-6);
  }
}

TEST_CASE("quadratic rejects bad inputs") {
  Eigen::MatrixXd asym(2, 2);
  asym << 1, 0.5, 0, 1;
  CHECK_THROWS_AS(QuadraticProblem(asym, Eigen::VectorXd::Zero(2), 0.0),
                  ValidationError);
  Eigen::MatrixXd indefinite(2, 2);
  indefinite << 1, 0, 0, -1;
  CHECK_THROWS_AS(QuadraticProblem(indefinite, Eigen::VectorXd::Zero(2), 0.0),
                  ValidationError);
  // Singular A with b outside its range leaves F unbounded below.
  Eigen::MatrixXd singular = Eigen::MatrixXd::Zero(2, 2);
  singular(0, 0) = 1.0;
  CHECK_THROWS_AS(QuadraticProblem(singular, Eigen::Vector2d(1.0, 1.0), 0.0),
                  ValidationError);
  CHECK_NOTHROW(QuadraticProblem(singular, Eigen::Vector2d(1.0, 0.0), 0.0));
  CHECK_THROWS_AS(QuadraticProblem(Eigen::MatrixXd::Identity(2, 2),
                                   Eigen::VectorXd::Zero(3), 0.0),
                  InvalidDimension);
  CHECK_THROWS(QuadraticProblem(Eigen::MatrixXd::Identity(2, 2),
                                Eigen::VectorXd::Zero(2), -1.0));

  const QuadraticProblem q = DiagonalQuadratic(0.0, 0.0);
  CHECK_THROWS_AS(q.Gradient(Eigen::VectorXd::Zero(3)), InvalidDimension);
  Eigen::VectorXd inf = Eigen::VectorXd::Zero(10);
  inf(4) = INFINITY;
  CHECK_THROWS(q.Gradient(inf));
}

TEST_CASE("quadratic stochastic gradients: unbiased with the stated variance") {
  // E||g - grad F||^2 = sigma^2 + beta ||grad F||^2 for this oracle.
  for (double beta : {0.0, 2.0}) {
    const QuadraticProblem q = DiagonalQuadratic(1.5, beta);
    const Eigen::VectorXd x = Eigen::VectorXd::Zero(10);
    const Eigen::VectorXd g = q.Gradient(x);
    Rng rng = MakeStream(11, 1);
    const int draws = 40000;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(10);
    double dev = 0.0;
    for (int s = 0; s < draws; ++s) {
      const Eigen::VectorXd sg = q.StochasticGradient(x, rng);
      mean += sg;
      dev += (sg - g).squaredNorm();
    }
    mean /= draws;
    dev /= draws;
    const double expected = 1.5 + beta * g.squaredNorm();
    CHECK(dev == doctest::Approx(expected).epsilon(0.05));
    CHECK((mean - g).norm() < 0.05 * std::sqrt(expected));
  }
}

TEST_CASE("logistic gradient and smoothness") {
  LogisticOptions options;
  options.samples = 60;
  options.dimension = 5;
  options.seed = 9;
  options.l2 = 0.01;
  const LogisticProblem f(options);
  Rng rng = MakeStream(5, 0);
  for (int t = 0; t < 5; ++t) {
    CHECK(FiniteDifferenceError(f, RandomPoint(5, rng)) < 1e-6);
  }
  // The reported L upper-bounds the gradient's Lipschitz ratio on sampled pairs.
  for (int t = 0; t < 500; ++t) {
    const Eigen::VectorXd x = RandomPoint(5, rng, 3.0);
    const Eigen::VectorXd y = RandomPoint(5, rng, 3.0);
    const double ratio =
        (f.Gradient(x) - f.Gradient(y)).norm() / (x - y).norm();
    CHECK(ratio <= f.lipschitz());
  }
}

TEST_CASE("logistic F_inf is a lower bound and nearly attained") {
  LogisticOptions options;
  options.samples = 80;
  options.dimension = 4;
  options.seed = 2;
  options.l2 = 0.05;
  const LogisticProblem f(options);
  Rng rng = MakeStream(8, 0);
  for (int t = 0; t < 200; ++t) {
    CHECK(f.Value(RandomPoint(4, rng)) >= f.f_inf() - 1e-12);
  }
  CHECK(std::isfinite(f.f_inf()));
  CHECK(f.f_inf() < f.Value(Eigen::VectorXd::Zero(4)));
}

TEST_CASE("logistic stochastic gradient is unbiased with variance below sigma^2") {
  LogisticOptions options;
  options.samples = 50;
  options.dimension = 3;
  options.seed = 4;
  options.batch = 2;
  const LogisticProblem f(options);
  const Eigen::VectorXd w = Eigen::VectorXd::Constant(3, 0.3);
  const Eigen::VectorXd g = f.Gradient(w);
  Rng rng = MakeStream(1, 2);
  const int draws = 40000;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(3);
  double dev = 0.0;
  for (int s = 0; s < draws; ++s) {
    const Eigen::VectorXd sg = f.StochasticGradient(w, rng);
    mean += sg;
    dev += (sg - g).squaredNorm();
  }
  mean /= draws;
  dev /= draws;
  CHECK((mean - g).norm() < 0.02);
  CHECK(dev <= f.sigma_sq());
}

TEST_CASE("logistic data are reproducible from the seed") {
  LogisticOptions options;
  options.seed = 77;
  const LogisticProblem a(options);
  const LogisticProblem b(options);
  CHECK(a.features() == b.features());
  CHECK(a.labels() == b.labels());
  options.seed = 78;
  const LogisticProblem c(options);
  CHECK_FALSE(a.features() == c.features());
}

TEST_CASE("oracle json round trip and strictness") {
  const QuadraticProblem q = DiagonalQuadratic(1.0, 0.5);
  const auto parsed = OracleFromJson(q.ToJson());
  CHECK(parsed->ToJson() == q.ToJson());
  CHECK(parsed->lipschitz() == q.lipschitz());
  CHECK(parsed->beta() == 0.5);

  LogisticOptions options;
  options.samples = 30;
  options.dimension = 3;
  options.seed = 5;
  const LogisticProblem l(options);
  const auto parsed_l = OracleFromJson(l.ToJson());
  CHECK(parsed_l->ToJson() == l.ToJson());
  CHECK(parsed_l->f_inf() == l.f_inf());

  nlohmann::json bad = q.ToJson();
  bad["curvature"] = 1;
  CHECK_THROWS_AS(OracleFromJson(bad), ConfigError);
  CHECK_THROWS_AS(OracleFromJson({{"type", "cubic"}}), ConfigError);
  CHECK_THROWS_AS(OracleFromJson(nlohmann::json::array()), ConfigError);
}

TEST_CASE("power iteration bound does not undershoot") {
  Rng rng = MakeStream(21, 0);
  for (int t = 0; t < 20; ++t) {
    const Eigen::MatrixXd b = Eigen::MatrixXd::Random(7, 7);
    const Eigen::MatrixXd m = b.transpose() * b;
    const double exact = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m)
                             .eigenvalues()
                             .maxCoeff();
    const double bound = PowerIterationBound(m);
    CHECK(bound >= exact);
    CHECK(bound <= exact * (1 + 1e-6));
  }
}

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
#include <numbers>
#include <vector>

#include "coopsgd/error.hpp"
#include "coopsgd/mixing.hpp"

using namespace coopsgd;

namespace {

// Second-largest |eigenvalue| of a circulant ring with weights (1/3, 1/3, 1/3):
// eigenvalues are (1 + 2 cos(2 pi k / m)) / 3.
double RingZetaByFourier(int m) {
  double best = 0.0;
  for (int k = 1; k < m; ++k) {
    const double lambda = (1.0 + 2.0 * std::cos(2.0 * std::numbers::pi * k / m)) / 3.0;
    best = std::max(best, std::abs(lambda));
  }
  return best;
}

}  // namespace

TEST_CASE("fully connected averaging has zeta 0") {
  for (int n : {1, 2, 5, 16}) {
    const MixingMatrix j = MakeFullyConnected(n);
    CHECK(std::abs(j.zeta()) < 1e-12);
    CHECK(j.valid());
    CHECK(j(0, n - 1) == doctest::Approx(1.0 / n));
  }
}

TEST_CASE("identity has zeta 1 and is flagged invalid") {
  const MixingMatrix id = MixingMatrix::Identity(4);
  CHECK(std::abs(id.zeta() - 1.0) < 1e-12);
  CHECK_FALSE(id.valid());
  CHECK_FALSE(ValidateMixing(id).valid);
}

TEST_CASE("ring spectrum matches the circulant formula") {
  for (int m = 3; m <= 20; ++m) {
    CHECK(std::abs(MakeRing(m).zeta() - RingZetaByFourier(m)) < 1e-12);
  }
  CHECK_THROWS_AS(MakeRing(2), InvalidDimension);
}

TEST_CASE("uniform construction hits the requested zeta") {
  for (double z : {0.0, 1.0 / 3.0, 0.5, 0.75, 0.8, 0.99}) {
    const MixingMatrix w = MakeUniformZeta(7, z);
    CHECK(std::abs(w.zeta() - z) < 1e-12);
  }
}

TEST_CASE("construction rejects malformed input") {
  CHECK_THROWS_AS(MixingMatrix(Eigen::MatrixXd(2, 3)), InvalidDimension);
  CHECK_THROWS_AS(MixingMatrix(Eigen::MatrixXd(0, 0)), InvalidDimension);
  CHECK_THROWS_AS(MixingMatrix(Eigen::MatrixXd::Identity(257, 257)),
                  InvalidDimension);

  Eigen::MatrixXd asym(2, 2);
  asym << 0.5, 0.5, 0.4, 0.6;
  CHECK_THROWS_AS(MixingMatrix{asym}, ValidationError);

  Eigen::MatrixXd bad_rows(2, 2);
  bad_rows << 0.5, 0.4, 0.4, 0.5;
  CHECK_THROWS_AS(MixingMatrix{bad_rows}, ValidationError);

  Eigen::MatrixXd nan = Eigen::MatrixXd::Constant(2, 2, 0.5);
  nan(0, 0) = std::nan("");
  CHECK_THROWS_AS(MixingMatrix{nan}, ValidationError);

  // Just inside the tolerance is accepted.
  Eigen::MatrixXd near = Eigen::MatrixXd::Constant(2, 2, 0.5);
  near(0, 0) += 5e-13;
  near(0, 1) -= 5e-13;
  near(1, 0) -= 5e-13;
  near(1, 1) += 5e-13;
  CHECK_NOTHROW(MixingMatrix{near});
}

TEST_CASE("ValidateMixing reports defects instead of throwing") {
  Eigen::MatrixXd asym(2, 2);
  asym << 0.5, 0.5, 0.3, 0.7;
  const ValidationReport r = ValidateMixing(asym);
  CHECK(r.symmetry_defect == doctest::Approx(0.2));
  CHECK(std::isnan(r.zeta));
  CHECK_FALSE(r.valid);
  CHECK_THROWS_AS(SpectralGap(asym), ValidationError);
}

TEST_CASE("EASGD closed form matches the eigensolve") {
  for (int m : {2, 3, 8, 20}) {
    for (int i = 1; i <= 30; ++i) {
      const double alpha = 0.8 * i / (30.0 * (m + 1));
      const MixingMatrix w = MakeEasgd(m, alpha);
      CHECK(std::abs(w.zeta() - EasgdZeta(m, alpha)) < 1e-10);
      CHECK(w.size() == m + 1);
    }
    const AlphaChoice best = BestEasgdAlpha(m);
    CHECK(best.alpha == doctest::Approx(2.0 / (m + 2)));
    CHECK(best.zeta == doctest::Approx(static_cast<double>(m) / (m + 2)));
  }
  const AlphaChoice eight = BestEasgdAlpha(8);
  CHECK(eight.alpha == doctest::Approx(0.2));
  CHECK(eight.zeta == doctest::Approx(0.8));
  // Past 2/(m+1) the anchor row overshoots and zeta exceeds 1.
  CHECK(MakeEasgd(8, 0.23).zeta() > 1.0);
}

TEST_CASE("generalized elastic closed form and optimum") {
  Rng rng = MakeStream(42, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 3 + trial % 8;
    const MixingMatrix w = MakeRandomDoublyStochastic(m, rng);
    for (double alpha : {0.01, 0.05, 0.1, 1.0 / (m + 1)}) {
      const MixingMatrix big = MakeGeneralizedElastic(w, alpha);
      CHECK(std::abs(big.zeta() - GeneralizedElasticZeta(w.zeta(), m, alpha)) <
            1e-9);
    }
    const AlphaChoice best = BestGeneralizedElasticAlpha(w.zeta(), m);
    CHECK(std::abs((1 - best.alpha) * w.zeta() - (m + 1) * best.alpha + 1) < 1e-12);
    CHECK(best.zeta < w.zeta());
    CHECK(std::abs(MakeGeneralizedElastic(w, best.alpha).zeta() - best.zeta) < 1e-9);
  }
  CHECK_THROWS_AS(MakeGeneralizedElastic(MakeRing(5), -0.1), ConfigError);
}

TEST_CASE("hierarchical construction") {
  const MixingMatrix inter = MakeRing(3);
  const std::vector<int> equal{2, 2, 2};
  const double alpha = 0.1;
  const MixingMatrix w = MakeHierarchical(equal, alpha, inter);
  REQUIRE(w.size() == 9);
  // Worker rows: 1 - alpha on the diagonal, alpha to the group's anchor.
  CHECK(w(0, 0) == doctest::Approx(1 - alpha));
  CHECK(w(0, 6) == doctest::Approx(alpha));
  CHECK(w(2, 7) == doctest::Approx(alpha));
  CHECK(w(0, 7) == 0.0);
  // Anchor block is (1 - s alpha) inter on the off-diagonal.
  CHECK(w(6, 7) == doctest::Approx((1 - 2 * alpha) * inter(0, 1)));
  CHECK(w.valid());

  const std::vector<int> unequal{1, 3};
  const MixingMatrix u = MakeHierarchical(unequal, 0.1, MakeFullyConnected(2));
  const ValidationReport r = ValidateMixing(u.entries());
  CHECK(r.symmetry_defect < 1e-15);
  CHECK(r.row_sum_defect < 1e-14);
  CHECK(u.valid());
}

TEST_CASE("random doubly stochastic matrices are valid and reproducible") {
  Rng a = MakeStream(7, 3);
  Rng b = MakeStream(7, 3);
  for (int n = 3; n <= 12; ++n) {
    const MixingMatrix w = MakeRandomDoublyStochastic(n, a);
    CHECK(w == MakeRandomDoublyStochastic(n, b));
    const ValidationReport r = ValidateMixing(w);
    CHECK(r.valid);
    CHECK(r.row_sum_defect < 1e-12);
    CHECK(w.zeta() >= 0.0);
    CHECK(w.zeta() < 1.0);
  }
}

TEST_CASE("power deviation norm follows zeta^j") {
  const std::vector<MixingMatrix> mats{MakeRing(8), MakeUniformZeta(5, 0.6),
                                       MakeEasgd(4, 0.2), MakeFullyConnected(4)};
  for (const MixingMatrix& w : mats) {
    CHECK(std::abs(PowerDeviationNorm(w, 0) - 1.0) < 1e-12);
    for (int j = 1; j <= 6; ++j) {
      CHECK(std::abs(PowerDeviationNorm(w, j) - std::pow(w.zeta(), j)) < 1e-10);
    }
  }
}

TEST_CASE("schedule alternates between W and I") {
  const MixingSchedule s(MakeRing(5), 3);
  CHECK(s.At(0) == s.base());
  CHECK(s.At(1) == MixingMatrix::Identity(5));
  CHECK(s.At(2) == MixingMatrix::Identity(5));
  CHECK(s.At(3) == s.base());
  CHECK(s.IsSyncStep(6));
  CHECK_FALSE(s.IsSyncStep(7));
}

TEST_CASE("json round trip and strict parsing") {
  const MixingMatrix w = MakeEasgd(5, 0.13);
  const nlohmann::json j = ToJson(w);
  CHECK(j.at("n") == 6);
  CHECK(j.at("entries").size() == 36);
  CHECK(MixingFromJson(j) == w);
  CHECK(MixingFromJson(nlohmann::json::parse(j.dump())) == w);

  nlohmann::json extra = j;
  extra["weights"] = 1;
  CHECK_THROWS_AS(MixingFromJson(extra), ConfigError);

  nlohmann::json wrong_zeta = j;
  wrong_zeta["zeta"] = w.zeta() + 1e-6;
  CHECK_THROWS_AS(MixingFromJson(wrong_zeta), ValidationError);

  nlohmann::json short_entries = j;
  short_entries["entries"].erase(0);
  CHECK_THROWS(MixingFromJson(short_entries));
}

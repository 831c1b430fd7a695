// Copyright 2026 The BFT Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "bft/numerics.hpp"
#include "bft/trial.hpp"
#include "test_util.hpp"

namespace bft {
namespace {

using testing::RandomSpd;
using testing::RandomTrial;

TEST(Covariance, ZeroChannel) {
  Trial t(1, 16, 128.0);
  const SymMatrix c = Covariance(t);
  ASSERT_EQ(c.dim(), 1u);
  EXPECT_EQ(c(0, 0), 0.0);
}

TEST(Covariance, IdenticalRowsGiveEqualEntries) {
  Trial t(2, 64, 128.0);
  for (std::size_t s = 0; s < 64; ++s) t.at(0, s) = t.at(1, s) = s % 2 == 0 ? 1.0 : -1.0;
  const SymMatrix c = Covariance(t);
  EXPECT_DOUBLE_EQ(c(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(c(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(c(1, 1), 1.0);
}

TEST(Covariance, MatchesDoubleLoop) {
  std::mt19937_64 rng(3);
  const Trial t = RandomTrial(4, 256, rng);
  const SymMatrix c = Covariance(t);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 256; ++k) s += t.at(i, k) * t.at(j, k);
      EXPECT_NEAR(c(i, j), s / 256.0, 1e-12);
    }
}

TEST(Covariance, NeedsTwoSamples) {
  Trial t(2, 1, 128.0);
  EXPECT_BFT_ERROR(Covariance(t), ErrorKind::kDegenerateInput);
}

TEST(SymMatrix, RejectsAsymmetric) {
  Matrix m(2, 2);
  m(0, 1) = 1.0;
  EXPECT_BFT_ERROR(SymMatrix{m}, ErrorKind::kContract);
}

TEST(Jacobi, ReconstructsRandomSpd) {
  std::mt19937_64 rng(11);
  for (std::size_t n : {1u, 2u, 5u, 16u}) {
    const SymMatrix m(RandomSpd(n, rng));
    const SymmetricEigen e = JacobiEigen(m);
    for (std::size_t k = 1; k < n; ++k) EXPECT_LE(e.values[k - 1], e.values[k]);
    Matrix d(n, n);
    for (std::size_t k = 0; k < n; ++k) d(k, k) = e.values[k];
    const Matrix rec = e.vectors * d * e.vectors.Transposed();
    EXPECT_LT(testing::MaxAbsDiff(rec, m.matrix()), 1e-10 * MaxAbs(m.matrix()));
    const Matrix orth = e.vectors.Transposed() * e.vectors;
    EXPECT_LT(testing::MaxAbsDiff(orth, Matrix::Identity(n)), 1e-12);
  }
}

TEST(InvSqrtPsd, Identity) {
  const SymMatrix r = InvSqrtPsd(SymMatrix::Identity(3), 0.0);
  EXPECT_LT(testing::MaxAbsDiff(r.matrix(), Matrix::Identity(3)), 1e-15);
}

TEST(InvSqrtPsd, Diagonal) {
  Matrix m(2, 2);
  m(0, 0) = 4.0;
  m(1, 1) = 9.0;
  const SymMatrix r = InvSqrtPsd(SymMatrix(m), 0.0);
  EXPECT_NEAR(r(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(r(1, 1), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(r(0, 1), 0.0);
}

TEST(InvSqrtPsd, WhitensRandomSpd) {
  std::mt19937_64 rng(5);
  const SymMatrix m(RandomSpd(6, rng));
  const Matrix a = InvSqrtPsd(m, 0.0).matrix();
  EXPECT_LT(testing::MaxAbsDiff(a * m.matrix() * a, Matrix::Identity(6)), 1e-8);
}

TEST(InvSqrtPsd, SingularNeedsRegularizer) {
  Matrix m(2, 2, 1.0);
  EXPECT_BFT_ERROR(InvSqrtPsd(SymMatrix(m), 0.0), ErrorKind::kNumerical);
  const SymMatrix r = InvSqrtPsd(SymMatrix(m));
  for (double v : r.matrix().values()) EXPECT_TRUE(std::isfinite(v));
  EXPECT_BFT_ERROR(InvSqrtPsd(SymMatrix(m), -1.0), ErrorKind::kContract);
}

TEST(SqrtPsd, SquaresBack) {
  std::mt19937_64 rng(9);
  const SymMatrix m(RandomSpd(5, rng));
  const Matrix s = SqrtPsd(m).matrix();
  EXPECT_LT(testing::MaxAbsDiff(s * s, m.matrix()), 1e-9 * MaxAbs(m.matrix()));
}

TEST(Softmax, ClosedForm) {
  const std::vector<double> w = Softmax(std::vector<double>{2.0, 0.0});
  const double e2 = std::exp(2.0);
  EXPECT_NEAR(w[0], e2 / (e2 + 1.0), 1e-15);
  EXPECT_NEAR(w[1], 1.0 / (e2 + 1.0), 1e-15);
  EXPECT_TRUE(Softmax(std::vector<double>{}).empty());
  const std::vector<double> big = Softmax(std::vector<double>{1000.0, 1000.0});
  EXPECT_DOUBLE_EQ(big[0], 0.5);
  const std::vector<double> sharp = Softmax(std::vector<double>{1.0, 0.0}, 0.5);
  EXPECT_NEAR(sharp[0], e2 / (e2 + 1.0), 1e-15);
}

std::vector<Complex> NaiveDft(const std::vector<Complex>& x, bool inverse) {
  const std::size_t n = x.size();
  std::vector<Complex> out(n);
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t k = 0; k < n; ++k) {
    Complex s = 0.0;
    for (std::size_t t = 0; t < n; ++t)
      s += x[t] * std::polar(1.0, sign * 2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(n));
    out[k] = inverse ? s / static_cast<double>(n) : s;
  }
  return out;
}

TEST(Fft, MatchesNaiveDft) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (std::size_t n : {1u, 2u, 7u, 8u, 12u, 100u, 128u}) {
    std::vector<Complex> x(n);
    for (auto& v : x) v = {g(rng), g(rng)};
    for (bool inv : {false, true}) {
      const std::vector<Complex> a = Fft(x, inv), b = NaiveDft(x, inv);
      for (std::size_t k = 0; k < n; ++k) EXPECT_LT(std::abs(a[k] - b[k]), 1e-9) << "n=" << n;
    }
  }
}

TEST(AnalyticSignal, CosineGivesSine) {
  const std::size_t n = 256;
  std::vector<double> x(n);
  for (std::size_t t = 0; t < n; ++t) x[t] = std::cos(2.0 * std::numbers::pi * 5.0 * static_cast<double>(t) / n);
  const ComplexSeries a = AnalyticSignal(x);
  for (std::size_t t = 0; t < n; ++t) {
    EXPECT_EQ(a.values[t].real(), x[t]);
    EXPECT_NEAR(a.values[t].imag(), std::sin(2.0 * std::numbers::pi * 5.0 * static_cast<double>(t) / n), 1e-9);
  }
}

TEST(AnalyticSignal, ConstantHasNoQuadrature) {
  const ComplexSeries a = AnalyticSignal(std::vector<double>(100, 3.0));
  for (const Complex& v : a.values) EXPECT_NEAR(v.imag(), 0.0, 1e-12);
}

TEST(AnalyticSignal, NoNegativeFrequencies) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (std::size_t n : {512u, 301u}) {
    std::vector<double> x(n);
    for (double& v : x) v = g(rng);
    const std::vector<Complex> spec = Fft(AnalyticSignal(x).values);
    for (std::size_t k = n / 2 + 1; k < n; ++k) EXPECT_LT(std::abs(spec[k]), 1e-9) << "n=" << n << " k=" << k;
  }
}

}  // namespace
}  // namespace bft

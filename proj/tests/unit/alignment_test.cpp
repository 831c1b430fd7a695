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

#include <chrono>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "bft/alignment.hpp"
#include "test_util.hpp"

namespace bft {
namespace {

using testing::MaxAbsDiff;
using testing::RandomTrial;

Matrix CovOracle(const Trial& t) {
  Matrix c(t.channels(), t.channels());
  for (std::size_t i = 0; i < t.channels(); ++i)
    for (std::size_t j = 0; j < t.channels(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < t.samples(); ++k) s += t.at(i, k) * t.at(j, k);
      c(i, j) = s / static_cast<double>(t.samples());
    }
  return c;
}

TEST(EaUpdate, FirstTrialSetsMean) {
  std::mt19937_64 rng(1);
  const Trial t = RandomTrial(4, 128, rng);
  const EaState s = EaUpdate(EaState{}, t);
  EXPECT_EQ(s.count(), 1u);
  EXPECT_LT(MaxAbsDiff(s.mean_cov().matrix(), CovOracle(t)), 1e-12);
}

TEST(EaUpdate, TwoTrialsAverage) {
  std::mt19937_64 rng(2);
  const Trial a = RandomTrial(4, 128, rng), b = RandomTrial(4, 128, rng);
  const EaState s = EaUpdate(EaUpdate(EaState{}, a), b);
  EXPECT_LT(MaxAbsDiff(s.mean_cov().matrix(), 0.5 * (CovOracle(a) + CovOracle(b))), 1e-12);
}

TEST(EaUpdate, StreamingMatchesBatchMean) {
  std::mt19937_64 rng(3);
  EaState s;
  Matrix sum(6, 6);
  for (int i = 0; i < 50; ++i) {
    const Trial t = RandomTrial(6, 200, rng);
    s = s.Updated(t);
    sum = sum + CovOracle(t);
  }
  EXPECT_LT(MaxAbsDiff(s.mean_cov().matrix(), (1.0 / 50.0) * sum), 1e-10);
}

TEST(EaUpdate, StateIsImmutable) {
  std::mt19937_64 rng(4);
  const EaState s0 = EaUpdate(EaState{}, RandomTrial(3, 64, rng));
  const Matrix before = s0.mean_cov().matrix();
  const EaState s1 = s0.Updated(RandomTrial(3, 64, rng));
  EXPECT_EQ(s0.count(), 1u);
  EXPECT_EQ(s1.count(), 2u);
  EXPECT_EQ(s0.mean_cov().matrix(), before);
}

TEST(EaUpdate, ChannelMismatch) {
  std::mt19937_64 rng(5);
  const EaState s = EaUpdate(EaState{}, RandomTrial(3, 64, rng));
  EXPECT_BFT_ERROR(s.Updated(RandomTrial(4, 64, rng)), ErrorKind::kDimension);
  EXPECT_BFT_ERROR(EaAlign(s, RandomTrial(4, 64, rng)), ErrorKind::kDimension);
}

TEST(EaAlign, UninitializedState) {
  std::mt19937_64 rng(6);
  EXPECT_BFT_ERROR(EaAlign(EaState{}, RandomTrial(3, 64, rng)), ErrorKind::kNotInitialized);
}

TEST(EaAlign, IdentityReferenceIsNoOp) {
  Trial a(2, 4, 128.0), b(2, 4, 128.0);
  const double v = std::sqrt(2.0);
  // Rows ±√2 on alternating halves: covariance exactly I.
  for (std::size_t s = 0; s < 4; ++s) {
    a.at(0, s) = s < 2 ? v : 0.0;
    a.at(1, s) = s < 2 ? 0.0 : v;
  }
  const EaState st = EaUpdate(EaState(0.0), a);
  EXPECT_LT(MaxAbsDiff(st.mean_cov().matrix(), Matrix::Identity(2)), 1e-15);
  std::mt19937_64 rng(7);
  b = RandomTrial(2, 4, rng);
  EXPECT_LT(MaxAbsDiff(EaAlign(st, b).data(), b.data()), 1e-14);
}

TEST(EaAlign, SingleTrialWhitensItself) {
  std::mt19937_64 rng(8);
  const Trial t = RandomTrial(5, 300, rng);
  // No regularizer: identity to round-off.
  const EaState exact = EaUpdate(EaState(0.0), t);
  EXPECT_LT(MaxAbsDiff(CovOracle(EaAlign(exact, t)), Matrix::Identity(5)), 1e-10);
  // Default regularizer: eigenvalues become λ/(λ + eps), off by at most eps/λ_min.
  const EaState s = EaUpdate(EaState{}, t);
  const double eps = DefaultWhiteningEps(s.mean_cov());
  const double lmin = JacobiEigen(s.mean_cov()).values.front();
  EXPECT_LT(MaxAbsDiff(CovOracle(EaAlign(s, t)), Matrix::Identity(5)), eps / lmin + 1e-12);
}

TEST(EaAlign, FinalStateWhitensMeanCovariance) {
  std::mt19937_64 rng(9);
  std::vector<Trial> trials;
  EaState s;
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 200; ++i) {
    trials.push_back(RandomTrial(8, 256, rng));
    s = s.Updated(trials.back());
  }
  Matrix sum(8, 8);
  for (const Trial& t : trials) sum = sum + CovOracle(EaAlign(s, t));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(FrobeniusNorm((1.0 / 200.0) * sum - Matrix::Identity(8)), 1e-6);
  EXPECT_LT(secs, 5.0);
}

TEST(EaAlignSet, MeanCovarianceIsIdentity) {
  std::mt19937_64 rng(10);
  std::vector<Trial> trials;
  for (int i = 0; i < 30; ++i) trials.push_back(RandomTrial(4, 128, rng));
  const std::vector<Trial> out = EaAlignSet(trials);
  Matrix sum(4, 4);
  for (const Trial& t : out) sum = sum + CovOracle(t);
  EXPECT_LT(FrobeniusNorm((1.0 / 30.0) * sum - Matrix::Identity(4)), 1e-6);
  EXPECT_BFT_ERROR(EaAlignSet(std::vector<Trial>{}), ErrorKind::kDegenerateInput);
}

TEST(EaAlignSet, SingleSubjectEqualsStreamingFinalState) {
  std::mt19937_64 rng(11);
  std::vector<Trial> trials;
  EaState s;
  for (int i = 0; i < 10; ++i) {
    trials.push_back(RandomTrial(4, 128, rng));
    s = s.Updated(trials.back());
  }
  const std::vector<Trial> out = EaAlignSet(trials);
  for (std::size_t i = 0; i < trials.size(); ++i) EXPECT_LT(MaxAbsDiff(out[i].data(), EaAlign(s, trials[i]).data()), 1e-10);
}

}  // namespace
}  // namespace bft

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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "bft/aggregate.hpp"
#include "test_util.hpp"

namespace bft {
namespace {

TEST(Classify, SingleBranchKeepsArgmax) {
  const std::vector<std::vector<double>> logits = {{0.3, 1.7, -2.0}};
  for (double tau : {0.1, 0.5, 1.0, 4.0}) EXPECT_EQ(Classify(logits, std::vector<double>{1.0}, tau).label, 1u);
}

TEST(Classify, SymmetricTieGoesToLowestIndex) {
  const std::vector<std::vector<double>> logits = {{2.0, 0.0}, {0.0, 2.0}};
  const ClassifyResult r = Classify(logits, std::vector<double>{0.5, 0.5}, 1.0);
  EXPECT_NEAR(r.probs[0], 0.5, 1e-15);
  EXPECT_NEAR(r.probs[1], 0.5, 1e-15);
  EXPECT_EQ(r.label, 0u);
}

TEST(Classify, HandEvaluated) {
  const std::vector<std::vector<double>> logits = {{2.0, 0.0}, {0.0, 2.0}};
  const ClassifyResult r = Classify(logits, std::vector<double>{0.9, 0.1}, 0.5);
  // softmax([4, 0]) = [e⁴/(e⁴+1), 1/(e⁴+1)].
  const double hi = std::exp(4.0) / (std::exp(4.0) + 1.0), lo = 1.0 / (std::exp(4.0) + 1.0);
  EXPECT_NEAR(r.probs[0], 0.9 * hi + 0.1 * lo, 1e-9);
  EXPECT_NEAR(r.probs[1], 0.9 * lo + 0.1 * hi, 1e-9);
  EXPECT_EQ(r.label, 0u);
}

TEST(Classify, ThreeClassHandEvaluated) {
  const std::vector<std::vector<double>> logits = {{1.0, 0.0, -1.0}, {0.0, 0.5, 0.0}, {-1.0, 3.0, 0.0}};
  const std::vector<double> w = {0.2, 0.5, 0.3};
  const ClassifyResult r = Classify(logits, w, 0.5);
  std::vector<double> expect(3, 0.0);
  for (std::size_t b = 0; b < 3; ++b) {
    double z = 0.0;
    for (double v : logits[b]) z += std::exp(v / 0.5);
    for (std::size_t c = 0; c < 3; ++c) expect[c] += w[b] * std::exp(logits[b][c] / 0.5) / z;
  }
  for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(r.probs[c], expect[c], 1e-9);
  EXPECT_EQ(r.label, 1u);
}

TEST(Classify, Contracts) {
  const std::vector<std::vector<double>> logits = {{1.0, 0.0}, {0.0, 1.0}};
  EXPECT_BFT_ERROR(Classify(logits, std::vector<double>{0.5, 0.6}), ErrorKind::kContract);
  EXPECT_BFT_ERROR(Classify(logits, std::vector<double>{1.0}), ErrorKind::kDimension);
  EXPECT_BFT_ERROR(Classify(logits, std::vector<double>{1.5, -0.5}), ErrorKind::kContract);
  EXPECT_BFT_ERROR(Classify(logits, std::vector<double>{0.5, 0.5}, 0.0), ErrorKind::kContract);
  const std::vector<std::vector<double>> bad = {{1.0, NAN}};
  EXPECT_BFT_ERROR(Classify(bad, std::vector<double>{1.0}), ErrorKind::kNumerical);
}

TEST(Regress, Examples) {
  EXPECT_EQ(Regress(std::vector<double>{0.7}, std::vector<double>{0.0}), 0.7);
  EXPECT_DOUBLE_EQ(Regress(std::vector<double>{0.1, 0.2, 0.9, 0.8}, std::vector<double>{0.1, 0.2, 0.9, 0.8}), 0.85);
  EXPECT_DOUBLE_EQ(Regress(std::vector<double>{1, 2, 3, 4, 5}, std::vector<double>{5, 4, 3, 2, 1}), 2.0);
  EXPECT_DOUBLE_EQ(MeanPrediction(std::vector<double>{1, 2, 3, 4, 5}), 3.0);
}

// Every ordering of distinct scores for K = 1..6: the top ⌈K/2⌉ are those
// with fewer than ⌈K/2⌉ strictly larger scores.
TEST(Regress, EnumeratedOrderings) {
  for (std::size_t k = 1; k <= 6; ++k) {
    std::vector<double> preds(k);
    for (std::size_t i = 0; i < k; ++i) preds[i] = std::ldexp(1.0, static_cast<int>(i));  // exact sums
    std::vector<double> scores(k);
    std::iota(scores.begin(), scores.end(), 0.0);
    const std::size_t top = (k + 1) / 2;
    do {
      double expect = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        std::size_t larger = 0;
        for (std::size_t j = 0; j < k; ++j) larger += scores[j] > scores[i];
        if (larger < top) expect += preds[i];
      }
      EXPECT_EQ(Regress(preds, scores), expect / static_cast<double>(top));
    } while (std::next_permutation(scores.begin(), scores.end()));
  }
}

TEST(Regress, TiesPreferLowerIndex) {
  EXPECT_EQ(Regress(std::vector<double>{1.0, 2.0, 4.0, 8.0}, std::vector<double>{0.0, 0.0, 0.0, 0.0}), 1.5);
  EXPECT_EQ(Regress(std::vector<double>{1.0, 2.0, 4.0}, std::vector<double>{1.0, 0.0, 1.0}), 2.5);
}

TEST(ArgmaxLowest, Ties) {
  EXPECT_EQ(ArgmaxLowest(std::vector<double>{1.0, 3.0, 3.0}), 1u);
  EXPECT_BFT_ERROR(ArgmaxLowest(std::vector<double>{}), ErrorKind::kContract);
}

}  // namespace
}  // namespace bft

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

#ifndef BFT_AGGREGATE_HPP_
#define BFT_AGGREGATE_HPP_

#include <cstddef>
#include <span>
#include <vector>

namespace bft {

inline constexpr double kDefaultTau = 0.5;

/// Index of the largest entry; ties go to the lowest index.
std::size_t ArgmaxLowest(std::span<const double> v);

struct ClassifyResult {
  std::size_t label = 0;
  std::vector<double> probs;  // fused, on the simplex
};

/// Σ_k w_k · softmax(logits_k / τ) and its argmax. `logits` holds K rows of
/// C ≥ 2 logits; `weights` must lie on the simplex.
ClassifyResult Classify(std::span<const std::vector<double>> logits, std::span<const double> weights,
                        double tau = kDefaultTau);

/// Mean of the ⌈K/2⌉ predictions with the highest scores. Equal scores are
/// ordered by branch index.
double Regress(std::span<const double> preds, std::span<const double> scores);

/// Plain mean of all K predictions.
double MeanPrediction(std::span<const double> preds);

}  // namespace bft

#endif  // BFT_AGGREGATE_HPP_

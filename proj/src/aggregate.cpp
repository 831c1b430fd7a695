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

#include "bft/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bft/error.hpp"
#include "bft/numerics.hpp"

namespace bft {

std::size_t ArgmaxLowest(std::span<const double> v) {
  Require(!v.empty(), ErrorKind::kContract, "argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

ClassifyResult Classify(std::span<const std::vector<double>> logits, std::span<const double> weights, double tau) {
  const std::size_t k = logits.size();
  Require(k >= 1, ErrorKind::kContract, "classification needs K >= 1 branches");
  Require(weights.size() == k, ErrorKind::kDimension, "weight count must equal branch count");
  Require(tau > 0.0, ErrorKind::kContract, "temperature must be positive");
  const std::size_t c = logits.front().size();
  Require(c >= 2, ErrorKind::kContract, "classification needs C >= 2 classes");
  double wsum = 0.0;
  for (double w : weights) {
    Require(w >= 0.0 && std::isfinite(w), ErrorKind::kContract, "weights must be non-negative");
    wsum += w;
  }
  Require(std::abs(wsum - 1.0) <= 1e-9, ErrorKind::kContract, "weights must sum to one");
  ClassifyResult out;
  out.probs.assign(c, 0.0);
  for (std::size_t b = 0; b < k; ++b) {
    Require(logits[b].size() == c, ErrorKind::kDimension, "branches disagree on the class count");
    for (double z : logits[b]) Require(std::isfinite(z), ErrorKind::kNumerical, "non-finite logit");
    const std::vector<double> p = Softmax(logits[b], tau);
    for (std::size_t j = 0; j < c; ++j) out.probs[j] += weights[b] * p[j];
  }
  out.label = ArgmaxLowest(out.probs);
  return out;
}

double Regress(std::span<const double> preds, std::span<const double> scores) {
  const std::size_t k = preds.size();
  Require(k >= 1, ErrorKind::kContract, "regression needs K >= 1 branches");
  Require(scores.size() == k, ErrorKind::kDimension, "score count must equal branch count");
  for (double p : preds) Require(std::isfinite(p), ErrorKind::kNumerical, "non-finite prediction");
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const std::size_t top = (k + 1) / 2;
  double s = 0.0;
  for (std::size_t j = 0; j < top; ++j) s += preds[order[j]];
  return s / static_cast<double>(top);
}

double MeanPrediction(std::span<const double> preds) {
  Require(!preds.empty(), ErrorKind::kContract, "mean of no predictions");
  double s = 0.0;
  for (double p : preds) {
    Require(std::isfinite(p), ErrorKind::kNumerical, "non-finite prediction");
    s += p;
  }
  return s / static_cast<double>(preds.size());
}

}  // namespace bft

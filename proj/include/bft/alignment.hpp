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

// Online Euclidean Alignment: the target reference R̄ is the running mean of
// trial covariances and every trial is whitened by R̄^(-1/2).

#ifndef BFT_ALIGNMENT_HPP_
#define BFT_ALIGNMENT_HPP_

#include <cstddef>
#include <optional>
#include <span>

#include "bft/numerics.hpp"
#include "bft/trial.hpp"

namespace bft {

enum class EaUpdateOrder {
  kUpdateThenAlign,  // the current trial contributes to its own reference
  kAlignThenUpdate,  // reference built from strictly earlier trials
};

/// Snapshot of the alignment reference. Immutable; updates return a new state.
class EaState {
 public:
  EaState() = default;
  /// Fixed whitening regularizer instead of the trace-scaled default.
  explicit EaState(std::optional<double> eps) : eps_(eps) {}

  std::size_t count() const { return count_; }
  bool initialized() const { return count_ > 0; }
  const SymMatrix& mean_cov() const { return mean_cov_; }
  const SymMatrix& whitener() const { return whitener_; }
  std::optional<double> eps() const { return eps_; }

  /// R̄' = (n·R̄ + cov(trial)) / (n + 1); whitener recomputed eagerly.
  EaState Updated(const Trial& trial) const;

 private:
  std::size_t count_ = 0;
  SymMatrix mean_cov_;
  SymMatrix whitener_;
  std::optional<double> eps_;
};

EaState EaUpdate(const EaState& state, const Trial& trial);

/// whitener · X. Throws kNotInitialized on an empty state.
Trial EaAlign(const EaState& state, const Trial& trial);

/// Offline EA over a whole set (each trial whitened by the set's mean
/// covariance), used for per-subject source alignment.
std::vector<Trial> EaAlignSet(std::span<const Trial> trials);

}  // namespace bft

#endif  // BFT_ALIGNMENT_HPP_

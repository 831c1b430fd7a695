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

#include "bft/alignment.hpp"

#include <string>

#include "bft/error.hpp"

namespace bft {

EaState EaState::Updated(const Trial& trial) const {
  const SymMatrix cov = Covariance(trial);
  EaState next = *this;
  if (count_ == 0) {
    next.mean_cov_ = cov;
  } else {
    Require(trial.channels() == mean_cov_.dim(), ErrorKind::kDimension,
            "trial has " + std::to_string(trial.channels()) + " channels, alignment state has " +
                std::to_string(mean_cov_.dim()));
    const double n = static_cast<double>(count_);
    Matrix m = (1.0 / (n + 1.0)) * (n * mean_cov_.matrix() + cov.matrix());
    next.mean_cov_ = SymMatrix(std::move(m));
  }
  next.count_ = count_ + 1;
  next.whitener_ = eps_ ? InvSqrtPsd(next.mean_cov_, *eps_) : InvSqrtPsd(next.mean_cov_);
  return next;
}

EaState EaUpdate(const EaState& state, const Trial& trial) { return state.Updated(trial); }

Trial EaAlign(const EaState& state, const Trial& trial) {
  Require(state.initialized(), ErrorKind::kNotInitialized, "alignment state has seen no trials");
  Require(trial.channels() == state.whitener().dim(), ErrorKind::kDimension,
          "trial channel count does not match alignment state");
  return Trial(state.whitener().matrix() * trial.data(), trial.rate_hz());
}

std::vector<Trial> EaAlignSet(std::span<const Trial> trials) {
  Require(!trials.empty(), ErrorKind::kDegenerateInput, "cannot align an empty trial set");
  EaState state;
  for (const Trial& t : trials) state = state.Updated(t);
  std::vector<Trial> out;
  out.reserve(trials.size());
  for (const Trial& t : trials) out.push_back(EaAlign(state, t));
  return out;
}

}  // namespace bft

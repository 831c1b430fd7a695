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

#include "bft/trial.hpp"

#include <cmath>
#include <string>

#include "bft/error.hpp"

namespace bft {

Trial::Trial(Matrix data, double rate_hz) : data_(std::move(data)), rate_hz_(rate_hz) {
  Require(rate_hz_ > 0.0 && std::isfinite(rate_hz_), ErrorKind::kContract, "sampling rate must be positive");
  Require(data_.rows() > 0 && data_.cols() > 0, ErrorKind::kContract, "trial must have channels and samples");
}

bool Trial::AllFinite() const {
  for (double v : data_.values())
    if (!std::isfinite(v)) return false;
  return true;
}

Trial Trial::Slice(std::size_t first, std::size_t count) const {
  Require(count > 0 && first + count <= samples(), ErrorKind::kRange,
          "slice [" + std::to_string(first) + ", " + std::to_string(first + count) + ") outside " +
              std::to_string(samples()) + " samples");
  Matrix out(channels(), count);
  for (std::size_t c = 0; c < channels(); ++c) {
    auto src = channel(c);
    auto dst = out.row(c);
    for (std::size_t t = 0; t < count; ++t) dst[t] = src[first + t];
  }
  return Trial(std::move(out), rate_hz_);
}

std::size_t SecondsToSamples(double seconds, double rate_hz) {
  Require(seconds >= 0.0, ErrorKind::kRange, "negative time offset");
  return static_cast<std::size_t>(std::llround(seconds * rate_hz));
}

}  // namespace bft

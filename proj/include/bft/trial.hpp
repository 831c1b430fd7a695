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

#ifndef BFT_TRIAL_HPP_
#define BFT_TRIAL_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "bft/numerics.hpp"

namespace bft {

/// One multichannel recording, channels × samples, at a fixed sampling rate.
class Trial {
 public:
  Trial() = default;
  Trial(Matrix data, double rate_hz);
  Trial(std::size_t channels, std::size_t samples, double rate_hz)
      : Trial(Matrix(channels, samples), rate_hz) {}

  std::size_t channels() const { return data_.rows(); }
  std::size_t samples() const { return data_.cols(); }
  double rate_hz() const { return rate_hz_; }
  double duration_s() const { return static_cast<double>(samples()) / rate_hz_; }

  double& at(std::size_t c, std::size_t t) { return data_(c, t); }
  double at(std::size_t c, std::size_t t) const { return data_(c, t); }
  std::span<double> channel(std::size_t c) { return data_.row(c); }
  std::span<const double> channel(std::size_t c) const { return data_.row(c); }

  const Matrix& data() const { return data_; }
  Matrix& data() { return data_; }

  bool AllFinite() const;

  /// Samples [first, first + count) of every channel.
  Trial Slice(std::size_t first, std::size_t count) const;

  friend bool operator==(const Trial&, const Trial&) = default;

 private:
  Matrix data_;
  double rate_hz_ = 1.0;
};

/// Seconds to a sample index at the trial's rate, rounded to nearest.
std::size_t SecondsToSamples(double seconds, double rate_hz);

}  // namespace bft

#endif  // BFT_TRIAL_HPP_

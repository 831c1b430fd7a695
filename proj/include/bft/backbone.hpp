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

// Closed-form fitting of an EEGNet-shaped backbone on labeled streams.
//
// The temporal convolution holds fixed band-pass FIR filters, the depthwise
// spatial convolution holds CSP filters per band, batch-norm statistics are
// measured on the training data, and the dense head is fitted by
// L2-regularized logistic regression (classification) or ridge regression.
// The result is an ordinary ModelBundle, so the streaming engine treats it
// exactly like an exported network.

#ifndef BFT_BACKBONE_HPP_
#define BFT_BACKBONE_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "bft/dataset.hpp"
#include "bft/model.hpp"
#include "bft/transforms.hpp"

namespace bft {

struct BackboneOptions {
  std::vector<std::pair<double, double>> bands = {{4.0, 8.0}, {8.0, 13.0}, {13.0, 20.0}, {20.0, 30.0}};
  std::size_t temporal_kernel = 33;
  std::size_t depth = 2;  // spatial filters per band
  std::size_t pool1 = 4;
  std::size_t sep_kernel = 9;
  std::size_t pool2 = 8;
  double l2 = 1e-2;
  std::size_t iterations = 400;
  /// Per-subject offline EA before fitting.
  bool ea = true;
  /// Randomly transformed copies of each training trial, drawn from `bank`.
  std::size_t augment_copies = 1;
  BankConfig bank;
  std::uint64_t seed = 0;
};

/// Band-pass windowed-sinc FIR (Hamming), unit gain at the band centre.
std::vector<double> BandPassFir(double lo_hz, double hi_hz, double rate_hz, std::size_t taps);

struct TrainingSet {
  std::vector<Trial> trials;  // model-input length
  std::vector<double> labels;
};

/// Training inputs as the model sees them: each stream EA-aligned on its own
/// (when enabled), cropped to the model input, plus augmented copies.
TrainingSet PrepareTrainingSet(std::span<const Stream> train, const BackboneOptions& opts);

ModelBundle FitBackbone(std::span<const Stream> train, const BackboneOptions& opts);

}  // namespace bft

#endif  // BFT_BACKBONE_HPP_

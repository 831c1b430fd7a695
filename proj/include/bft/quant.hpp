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

// Post-training static int8 quantization of a ModelBundle.
//
// Batch norms are folded into the preceding convolution, every weight tensor
// gets one affine (scale, zero point) pair, and activation ranges come from a
// calibration pass over float activations. The integer path accumulates in
// int32/int64 and requantizes with a fixed-point multiplier between layers;
// ELU runs as a 256-entry lookup table.

#ifndef BFT_QUANT_HPP_
#define BFT_QUANT_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bft/container.hpp"
#include "bft/model.hpp"

namespace bft {

/// real = scale · (q − zero_point), q ∈ [−128, 127].
struct QuantParams {
  double scale = 1.0;
  int zero_point = 0;

  double step() const { return scale; }
};

/// Range [lo, hi] widened to contain 0 so that zero is exactly representable.
QuantParams ChooseQuantParams(double lo, double hi);
std::int8_t QuantizeValue(double v, const QuantParams& p);
double DequantizeValue(int q, const QuantParams& p);

struct QuantTensor {
  std::vector<std::int8_t> q;
  QuantParams params;
};

QuantTensor QuantizeTensor(std::span<const double> values);
std::vector<double> DequantizeTensor(const QuantTensor& t);

/// Real multiplier M > 0 as M0 · 2^(−shift) with M0 in [2^30, 2^31).
struct FixedPointMultiplier {
  std::int64_t multiplier = 0;
  int shift = 0;
};

FixedPointMultiplier MakeFixedPointMultiplier(double real);
/// round(acc · M), ties away from zero.
std::int64_t ApplyMultiplier(std::int64_t acc, const FixedPointMultiplier& m);

enum class QOpKind { kTemporalConv, kDepthwise, kSeparableDepthwise, kPointwise, kElu, kAvgPool, kFlatten, kDense };

struct QOp {
  QOpKind kind = QOpKind::kFlatten;
  std::size_t in_maps = 0, out_maps = 0, kernel = 0, pool = 0;
  std::size_t in_features = 0, out_features = 0;
  QuantTensor weight;
  /// Folded batch-norm scale per output map, applied at requantization.
  /// Empty means 1 for every map.
  std::vector<double> channel_scale;
  std::vector<std::int32_t> bias;  // scale = weight.scale · in.scale
  QuantParams in, out;
  std::vector<std::int8_t> lut;    // elu: indexed by q + 128
};

struct CalibrationOptions {
  /// Clip activation ranges to the [0.1, 99.9] percentiles instead of min/max.
  bool percentile_clip = false;
  double percentile = 99.9;
};

class QuantModel {
 public:
  QuantModel() = default;
  QuantModel(std::vector<QOp> ops, QuantParams input, HeadKind head_kind, std::size_t channels, std::size_t samples,
             double rate_hz);

  const std::vector<QOp>& ops() const { return ops_; }
  const QuantParams& input_params() const { return input_; }
  HeadKind head_kind() const { return head_kind_; }
  std::size_t flatten_op() const { return flatten_op_; }
  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t num_outputs() const { return num_outputs_; }
  std::size_t input_channels() const { return channels_; }
  std::size_t input_samples() const { return samples_; }
  double rate_hz() const { return rate_hz_; }
  /// Quantization step of the final layer's calibrated output range.
  double output_step() const { return ops_.back().out.scale; }

 private:
  std::vector<QOp> ops_;
  QuantParams input_;
  HeadKind head_kind_ = HeadKind::kClassifier;
  std::size_t flatten_op_ = 0;
  std::size_t feature_dim_ = 0;
  std::size_t num_outputs_ = 0;
  std::size_t channels_ = 0, samples_ = 0;
  double rate_hz_ = 1.0;
};

/// Float model with every batch norm folded into the preceding convolution.
/// Inference-equivalent to the input up to round-off.
ModelBundle FoldBatchNorm(const ModelBundle& m);

QuantModel Quantize(const ModelBundle& m, std::span<const Trial> calib, const CalibrationOptions& opts = {});

/// Integer-path feature extractor; features are dequantized at the end.
FeatureVector FeaturesQ(const QuantModel& q, const Trial& trial);
/// Integer-path head; the final accumulator is dequantized without rounding.
Prediction HeadQ(const QuantModel& q, const FeatureVector& f);
Prediction ForwardQ(const QuantModel& q, const Trial& trial);

Container QuantModelToContainer(const QuantModel& q);
QuantModel QuantModelFromContainer(const Container& c);
void SaveQuantModelFile(const std::filesystem::path& path, const QuantModel& q);
QuantModel LoadQuantModelFile(const std::filesystem::path& path);

}  // namespace bft

#endif  // BFT_QUANT_HPP_

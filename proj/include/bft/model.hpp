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

// Forward-only engine for EEGNet-family networks. The layer list is split at
// the single Flatten layer: everything up to and including Flatten is the
// feature extractor, the remainder is the task head.

#ifndef BFT_MODEL_HPP_
#define BFT_MODEL_HPP_

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bft/container.hpp"
#include "bft/transforms.hpp"
#include "bft/trial.hpp"

namespace bft {

enum class LayerKind {
  kConv2dTemporal,  // (1 × k) kernels along time, "same" padding
  kDepthwiseConv,   // (rows × 1) spatial kernel per input map, depth multiplier D
  kSeparableConv,   // depthwise (1 × k) "same" + pointwise 1×1
  kBatchNorm,
  kElu,
  kAvgPool,  // (1 × p), stride p, floor
  kFlatten,
  kDense,
};

const char* LayerKindName(LayerKind kind);
LayerKind ParseLayerKind(const std::string& name);

struct LayerSpec {
  LayerKind kind = LayerKind::kFlatten;
  std::size_t in_maps = 0;
  std::size_t out_maps = 0;
  std::size_t kernel = 0;  // temporal width, or spatial height for depthwise
  std::size_t pool = 0;
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  bool bias = false;
  double eps = 1e-5;       // batch norm
  double momentum = 0.1;   // batch norm
  double alpha = 1.0;      // elu
};

/// Parameters of one layer. Unused tensors stay empty.
struct Layer {
  LayerSpec spec;
  std::vector<double> weight;        // conv/dense kernel, depthwise part of separable
  std::vector<double> pointwise;     // separable only: [out_maps, in_maps]
  std::vector<double> bias;          // [out_maps] or [out_features]
  std::vector<double> gamma, beta;   // batch norm affine
  std::vector<double> running_mean, running_var;
};

/// Activation volume: maps × rows × cols, row-major.
struct Activation {
  std::size_t maps = 0, rows = 0, cols = 0;
  std::vector<double> data;

  Activation() = default;
  Activation(std::size_t m, std::size_t r, std::size_t c) : maps(m), rows(r), cols(c), data(m * r * c, 0.0) {}
  double& at(std::size_t m, std::size_t r, std::size_t c) { return data[(m * rows + r) * cols + c]; }
  double at(std::size_t m, std::size_t r, std::size_t c) const { return data[(m * rows + r) * cols + c]; }
};

enum class HeadKind { kClassifier, kRegressor };

/// Head output: C logits for a classifier, one value for a regressor.
struct Prediction {
  std::vector<double> values;
  std::size_t size() const { return values.size(); }
  double scalar() const { return values.front(); }
};

class ModelBundle {
 public:
  ModelBundle() = default;

  /// Validates shapes, composition and finiteness; throws kLoad with the
  /// offending layer index.
  ModelBundle(std::vector<Layer> layers, HeadKind head_kind, std::size_t channels, std::size_t samples,
              double rate_hz, nlohmann::json metadata = nlohmann::json::object());

  const std::vector<Layer>& layers() const { return layers_; }
  HeadKind head_kind() const { return head_kind_; }
  std::size_t num_outputs() const { return num_outputs_; }
  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t flatten_index() const { return flatten_index_; }
  std::size_t input_channels() const { return channels_; }
  std::size_t input_samples() const { return samples_; }
  double rate_hz() const { return rate_hz_; }
  const nlohmann::json& metadata() const { return metadata_; }

  /// Copy with replaced batch-norm running statistics (layer order).
  ModelBundle WithBatchNormStats(std::vector<std::vector<double>> means, std::vector<std::vector<double>> vars) const;

 private:
  std::vector<Layer> layers_;
  HeadKind head_kind_ = HeadKind::kClassifier;
  std::size_t num_outputs_ = 0;
  std::size_t feature_dim_ = 0;
  std::size_t flatten_index_ = 0;
  std::size_t channels_ = 0;
  std::size_t samples_ = 0;
  double rate_hz_ = 1.0;
  nlohmann::json metadata_;
};

Activation TrialToActivation(const Trial& trial);

/// Runs one layer in inference mode.
Activation ForwardLayer(const Layer& layer, const Activation& in);

/// g(x): inference-mode forward through Flatten.
FeatureVector Features(const ModelBundle& m, const Trial& trial);

/// g over several trials. Identical to calling Features per trial.
std::vector<FeatureVector> FeaturesBatch(const ModelBundle& m, std::span<const Trial> trials);

/// h(f).
Prediction Head(const ModelBundle& m, const FeatureVector& f);

inline Prediction Forward(const ModelBundle& m, const Trial& trial) { return Head(m, Features(m, trial)); }

/// BN-adapt: forwards the batch in training-mode normalization and moves each
/// BatchNorm's running mean/var toward the batch statistics:
/// running ← (1 − momentum)·running + momentum·batch (unbiased batch variance).
/// Learned affine parameters are never touched. momentum ∈ (0, 1].
ModelBundle BnAdapt(const ModelBundle& m, std::span<const Trial> batch, double momentum);

Container ModelToContainer(const ModelBundle& m, DType dtype = DType::kF32);
ModelBundle ModelFromContainer(const Container& c);
ModelBundle LoadModel(std::span<const std::uint8_t> bytes);
ModelBundle LoadModelFile(const std::filesystem::path& path);
void SaveModelFile(const std::filesystem::path& path, const ModelBundle& m, DType dtype = DType::kF32);

}  // namespace bft

#endif  // BFT_MODEL_HPP_

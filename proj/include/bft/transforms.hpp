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

// Test-time transformations. Augmentation branches transform the input trial
// before the feature extractor; dropout branches mask the extracted features.

#ifndef BFT_TRANSFORMS_HPP_
#define BFT_TRANSFORMS_HPP_

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "bft/trial.hpp"

namespace bft {

/// Output of the feature extractor for one branch.
struct FeatureVector {
  std::vector<double> values;

  FeatureVector() = default;
  explicit FeatureVector(std::vector<double> v) : values(std::move(v)) {}
  std::size_t dim() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

enum class TransformKind { kIdentity, kScale, kNoise, kFreqShift, kSlide };

const char* TransformKindName(TransformKind kind);
TransformKind ParseTransformKind(const std::string& name);

struct TransformSpec {
  TransformKind kind = TransformKind::kIdentity;
  double scale = 1.0;        // kScale
  double noise_ratio = 0.0;  // kNoise: std as a fraction of each channel's std
  std::uint64_t seed = 0;    // kNoise
  double shift_hz = 0.0;     // kFreqShift
  double start_s = 0.0;      // kSlide: window start in the untruncated trial

  static TransformSpec Identity() { return {}; }
  static TransformSpec Scale(double factor);
  static TransformSpec Noise(double ratio, std::uint64_t seed);
  static TransformSpec FreqShift(double hz);
  static TransformSpec Slide(double start_s);

  std::string Label() const;
  void Validate() const;
};

/// Number of samples the model consumes: the trial minus its last second.
std::size_t TruncatedLength(const Trial& full);

/// Applies one transform and returns a trial of `input_samples` samples.
/// Non-slide kinds act on the first `input_samples` of the trial; Slide crops
/// [start, start + input_samples) from the full trial.
Trial ApplyTransform(const Trial& full, const TransformSpec& spec, std::size_t input_samples);
Trial ApplyTransform(const Trial& full, const TransformSpec& spec);

/// Adds N(0, (ratio·σ_c)²) to every sample of channel c, where σ_c is the
/// channel's standard deviation, over samples [first, last).
void AddProportionalNoise(Trial& trial, double ratio, std::mt19937_64& rng, std::size_t first,
                          std::size_t last);

/// Frequency shift via the analytic signal: Re(a(t)·e^{i2πΔf t}).
Trial ShiftFrequency(const Trial& trial, double shift_hz);

struct BankConfig {
  std::vector<std::string> kinds = {"identity", "scale", "noise", "freq_shift", "slide"};
  std::vector<double> scales = {0.9, 1.1, 1.2};
  double noise_ratio = 0.05;
  std::uint64_t noise_seed = 0;
  std::vector<double> freq_shifts_hz = {0.2, -0.2};
  std::vector<double> slide_starts_s = {0.2, 0.4, 0.6, 0.8, 1.0};
};

/// Bank in fixed order: identity, scales, noise, frequency shifts, slides.
/// The default config yields the 12-branch bank.
std::vector<TransformSpec> BuildBank(const BankConfig& config);

struct DropoutMask {
  std::vector<std::uint8_t> kept;  // 1 keeps the feature
  double rate = 0.5;               // p in the 1/(1-p) compensation

  std::size_t dim() const { return kept.size(); }
  std::size_t dropped() const;
};

/// K masks partitioning [0, d): mask k drops block k (contiguous, sizes
/// ⌊d/K⌋ plus one for the first d mod K blocks) or, when `strided`, the
/// indices i ≡ k (mod K). Rate is 1/K. Requires K ≥ 2 and d ≥ K.
std::vector<DropoutMask> BuildMasks(std::size_t k, std::size_t d, bool strided = false);

/// Same partition structure over a random permutation of the indices.
std::vector<DropoutMask> BuildPermutedMasks(std::size_t k, std::size_t d, std::mt19937_64& rng);

/// kept_i · f_i / (1 - p).
FeatureVector ApplyMask(const FeatureVector& f, const DropoutMask& mask);

}  // namespace bft

#endif  // BFT_TRANSFORMS_HPP_

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

#include "bft/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "bft/error.hpp"

namespace bft {

const char* TransformKindName(TransformKind kind) {
  switch (kind) {
    case TransformKind::kIdentity: return "identity";
    case TransformKind::kScale: return "scale";
    case TransformKind::kNoise: return "noise";
    case TransformKind::kFreqShift: return "freq_shift";
    case TransformKind::kSlide: return "slide";
  }
  return "?";
}

TransformKind ParseTransformKind(const std::string& name) {
  for (TransformKind k : {TransformKind::kIdentity, TransformKind::kScale, TransformKind::kNoise,
                          TransformKind::kFreqShift, TransformKind::kSlide}) {
    if (name == TransformKindName(k)) return k;
  }
  Fail(ErrorKind::kConfig, "unknown transform kind '" + name + "'");
}

TransformSpec TransformSpec::Scale(double factor) {
  TransformSpec s;
  s.kind = TransformKind::kScale;
  s.scale = factor;
  s.Validate();
  return s;
}

TransformSpec TransformSpec::Noise(double ratio, std::uint64_t seed) {
  TransformSpec s;
  s.kind = TransformKind::kNoise;
  s.noise_ratio = ratio;
  s.seed = seed;
  s.Validate();
  return s;
}

TransformSpec TransformSpec::FreqShift(double hz) {
  TransformSpec s;
  s.kind = TransformKind::kFreqShift;
  s.shift_hz = hz;
  s.Validate();
  return s;
}

TransformSpec TransformSpec::Slide(double start_s) {
  TransformSpec s;
  s.kind = TransformKind::kSlide;
  s.start_s = start_s;
  s.Validate();
  return s;
}

std::string TransformSpec::Label() const {
  std::ostringstream os;
  os << TransformKindName(kind);
  switch (kind) {
    case TransformKind::kIdentity: break;
    case TransformKind::kScale: os << "(" << scale << ")"; break;
    case TransformKind::kNoise: os << "(" << noise_ratio << ")"; break;
    case TransformKind::kFreqShift: os << "(" << shift_hz << "Hz)"; break;
    case TransformKind::kSlide: os << "(" << start_s << "s)"; break;
  }
  return os.str();
}

void TransformSpec::Validate() const {
  switch (kind) {
    case TransformKind::kScale:
      Require(scale > 0.0 && std::isfinite(scale), ErrorKind::kConfig, "scale factor must be > 0");
      break;
    case TransformKind::kNoise:
      Require(noise_ratio >= 0.0 && std::isfinite(noise_ratio), ErrorKind::kConfig, "noise ratio must be >= 0");
      break;
    case TransformKind::kFreqShift:
      Require(std::isfinite(shift_hz), ErrorKind::kConfig, "frequency shift must be finite");
      break;
    case TransformKind::kSlide:
      Require(start_s >= 0.0 && std::isfinite(start_s), ErrorKind::kConfig, "slide start must be >= 0");
      break;
    case TransformKind::kIdentity: break;
  }
}

std::size_t TruncatedLength(const Trial& full) {
  const std::size_t one_second = SecondsToSamples(1.0, full.rate_hz());
  Require(full.samples() > one_second, ErrorKind::kRange, "trial shorter than the one-second slide margin");
  return full.samples() - one_second;
}

void AddProportionalNoise(Trial& trial, double ratio, std::mt19937_64& rng, std::size_t first,
                          std::size_t last) {
  Require(first < last && last <= trial.samples(), ErrorKind::kRange, "noise window outside trial");
  if (ratio == 0.0) return;
  for (std::size_t c = 0; c < trial.channels(); ++c) {
    auto x = trial.channel(c);
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(x.size()));
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t t = first; t < last; ++t) x[t] += ratio * sd * noise(rng);
  }
}

Trial ShiftFrequency(const Trial& trial, double shift_hz) {
  Trial out = trial;
  const double w = 2.0 * std::numbers::pi * shift_hz / trial.rate_hz();
  for (std::size_t c = 0; c < trial.channels(); ++c) {
    const ComplexSeries a = AnalyticSignal(trial.channel(c));
    auto y = out.channel(c);
    for (std::size_t t = 0; t < a.size(); ++t) {
      const double ph = w * static_cast<double>(t);
      y[t] = a.values[t].real() * std::cos(ph) - a.values[t].imag() * std::sin(ph);
    }
  }
  return out;
}

Trial ApplyTransform(const Trial& full, const TransformSpec& spec, std::size_t input_samples) {
  spec.Validate();
  Require(input_samples > 0 && input_samples <= full.samples(), ErrorKind::kRange,
          "model input length exceeds trial length");
  Trial out;
  switch (spec.kind) {
    case TransformKind::kIdentity:
      out = full.Slice(0, input_samples);
      break;
    case TransformKind::kScale:
      out = full.Slice(0, input_samples);
      for (double& v : out.data().values()) v *= spec.scale;
      break;
    case TransformKind::kNoise: {
      out = full.Slice(0, input_samples);
      std::mt19937_64 rng(spec.seed);
      AddProportionalNoise(out, spec.noise_ratio, rng, 0, out.samples());
      break;
    }
    case TransformKind::kFreqShift:
      out = ShiftFrequency(full.Slice(0, input_samples), spec.shift_hz);
      break;
    case TransformKind::kSlide: {
      const std::size_t start = SecondsToSamples(spec.start_s, full.rate_hz());
      Require(start + input_samples <= full.samples(), ErrorKind::kRange,
              "slide window starting at " + std::to_string(spec.start_s) + " s exceeds the trial");
      out = full.Slice(start, input_samples);
      break;
    }
  }
  Require(out.AllFinite(), ErrorKind::kNumerical, "transform " + spec.Label() + " produced non-finite values");
  return out;
}

Trial ApplyTransform(const Trial& full, const TransformSpec& spec) {
  return ApplyTransform(full, spec, TruncatedLength(full));
}

std::vector<TransformSpec> BuildBank(const BankConfig& config) {
  Require(!config.kinds.empty(), ErrorKind::kConfig, "transform bank needs at least one kind");
  bool enabled[5] = {false, false, false, false, false};
  for (const std::string& name : config.kinds) enabled[static_cast<int>(ParseTransformKind(name))] = true;

  std::vector<TransformSpec> bank;
  if (enabled[static_cast<int>(TransformKind::kIdentity)]) bank.push_back(TransformSpec::Identity());
  if (enabled[static_cast<int>(TransformKind::kScale)])
    for (double f : config.scales) bank.push_back(TransformSpec::Scale(f));
  if (enabled[static_cast<int>(TransformKind::kNoise)])
    bank.push_back(TransformSpec::Noise(config.noise_ratio, config.noise_seed));
  if (enabled[static_cast<int>(TransformKind::kFreqShift)])
    for (double hz : config.freq_shifts_hz) bank.push_back(TransformSpec::FreqShift(hz));
  if (enabled[static_cast<int>(TransformKind::kSlide)])
    for (double s : config.slide_starts_s) bank.push_back(TransformSpec::Slide(s));
  Require(!bank.empty(), ErrorKind::kConfig, "transform bank is empty");
  return bank;
}

std::size_t DropoutMask::dropped() const {
  return static_cast<std::size_t>(std::count(kept.begin(), kept.end(), std::uint8_t{0}));
}

namespace {

// Block boundaries: ⌊d/K⌋ each, the first d mod K blocks one larger.
std::vector<std::size_t> BlockStarts(std::size_t k, std::size_t d) {
  std::vector<std::size_t> starts(k + 1, 0);
  const std::size_t base = d / k;
  const std::size_t extra = d % k;
  for (std::size_t b = 0; b < k; ++b) starts[b + 1] = starts[b] + base + (b < extra ? 1 : 0);
  return starts;
}

void CheckPartition(std::size_t k, std::size_t d) {
  Require(k >= 2, ErrorKind::kContract, "dropout partition needs K >= 2");
  Require(d >= k, ErrorKind::kContract,
          "cannot partition " + std::to_string(d) + " features into " + std::to_string(k) + " masks");
}

}  // namespace

std::vector<DropoutMask> BuildMasks(std::size_t k, std::size_t d, bool strided) {
  CheckPartition(k, d);
  std::vector<DropoutMask> masks(k);
  const std::vector<std::size_t> starts = BlockStarts(k, d);
  for (std::size_t m = 0; m < k; ++m) {
    masks[m].rate = 1.0 / static_cast<double>(k);
    masks[m].kept.assign(d, 1);
    if (strided) {
      for (std::size_t i = m; i < d; i += k) masks[m].kept[i] = 0;
    } else {
      for (std::size_t i = starts[m]; i < starts[m + 1]; ++i) masks[m].kept[i] = 0;
    }
  }
  return masks;
}

std::vector<DropoutMask> BuildPermutedMasks(std::size_t k, std::size_t d, std::mt19937_64& rng) {
  CheckPartition(k, d);
  std::vector<std::size_t> perm(d);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<DropoutMask> masks = BuildMasks(k, d, false);
  for (DropoutMask& m : masks) {
    std::vector<std::uint8_t> kept(d, 1);
    for (std::size_t i = 0; i < d; ++i)
      if (!m.kept[i]) kept[perm[i]] = 0;
    m.kept = std::move(kept);
  }
  return masks;
}

FeatureVector ApplyMask(const FeatureVector& f, const DropoutMask& mask) {
  Require(f.dim() == mask.dim(), ErrorKind::kDimension,
          "feature dim " + std::to_string(f.dim()) + " vs mask dim " + std::to_string(mask.dim()));
  Require(mask.rate > 0.0 && mask.rate < 1.0, ErrorKind::kContract, "dropout rate must lie in (0,1)");
  const double scale = 1.0 / (1.0 - mask.rate);
  FeatureVector out;
  out.values.resize(f.dim());
  for (std::size_t i = 0; i < f.dim(); ++i) out.values[i] = mask.kept[i] ? f.values[i] * scale : 0.0;
  return out;
}

}  // namespace bft

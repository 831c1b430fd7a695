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

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "bft/numerics.hpp"
#include "bft/transforms.hpp"
#include "test_util.hpp"

namespace bft {
namespace {

using testing::RandomTrial;

TEST(ApplyTransform, IdentityIsTruncation) {
  std::mt19937_64 rng(1);
  const Trial full = RandomTrial(3, 512, rng);
  const Trial out = ApplyTransform(full, TransformSpec::Identity());
  ASSERT_EQ(out.samples(), 384u);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t t = 0; t < 384; ++t) EXPECT_EQ(out.at(c, t), full.at(c, t));
}

TEST(ApplyTransform, ScaleMultipliesEveryEntry) {
  std::mt19937_64 rng(2);
  const Trial full = RandomTrial(3, 512, rng);
  const Trial out = ApplyTransform(full, TransformSpec::Scale(1.1));
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t t = 0; t < out.samples(); ++t) EXPECT_EQ(out.at(c, t), full.at(c, t) * 1.1);
}

TEST(ApplyTransform, SlideWindows) {
  std::mt19937_64 rng(3);
  const Trial full = RandomTrial(2, 512, rng);  // 4 s at 128 Hz
  for (double start : {0.2, 0.4, 0.6, 0.8, 1.0}) {
    const Trial out = ApplyTransform(full, TransformSpec::Slide(start));
    ASSERT_EQ(out.samples(), 384u);
    const std::size_t first = static_cast<std::size_t>(std::lround(start * 128.0));
    for (std::size_t t = 0; t < 384; ++t) EXPECT_EQ(out.at(1, t), full.at(1, first + t));
  }
  EXPECT_BFT_ERROR(ApplyTransform(full, TransformSpec::Slide(1.5)), ErrorKind::kRange);
}

TEST(ApplyTransform, NoiseIsSeededAndProportional) {
  std::mt19937_64 rng(4);
  Trial full = RandomTrial(2, 20000 + 128, rng);
  for (std::size_t t = 0; t < full.samples(); ++t) full.at(1, t) *= 10.0;
  const Trial a = ApplyTransform(full, TransformSpec::Noise(0.05, 9));
  const Trial b = ApplyTransform(full, TransformSpec::Noise(0.05, 9));
  const Trial c = ApplyTransform(full, TransformSpec::Noise(0.05, 10));
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  const Trial clean = ApplyTransform(full, TransformSpec::Identity());
  for (std::size_t ch = 0; ch < 2; ++ch) {
    double m = 0.0, v = 0.0, dv = 0.0;
    const std::size_t n = clean.samples();
    for (std::size_t t = 0; t < n; ++t) m += clean.at(ch, t);
    m /= static_cast<double>(n);
    for (std::size_t t = 0; t < n; ++t) {
      v += (clean.at(ch, t) - m) * (clean.at(ch, t) - m);
      const double d = a.at(ch, t) - clean.at(ch, t);
      dv += d * d;
    }
    const double ratio = std::sqrt(dv / v);
    EXPECT_NEAR(ratio, 0.05, 0.05 * 0.03) << "channel " << ch;
  }
  EXPECT_EQ(ApplyTransform(full, TransformSpec::Noise(0.0, 1)), clean);
}

TEST(ShiftFrequency, MovesAToneAndKeepsZeroShift) {
  const double rate = 128.0;
  const std::size_t n = 512;
  Trial t(1, n, rate);
  for (std::size_t s = 0; s < n; ++s) t.at(0, s) = std::cos(2.0 * std::numbers::pi * 10.0 * static_cast<double>(s) / rate);
  const Trial same = ShiftFrequency(t, 0.0);
  for (std::size_t s = 0; s < n; ++s) EXPECT_NEAR(same.at(0, s), t.at(0, s), 1e-12);
  const Trial up = ShiftFrequency(t, 0.25);
  for (std::size_t s = 0; s < n; ++s)
    EXPECT_NEAR(up.at(0, s), std::cos(2.0 * std::numbers::pi * 10.25 * static_cast<double>(s) / rate), 1e-9);
}

TEST(BuildBank, DefaultOrder) {
  const std::vector<TransformSpec> bank = BuildBank(BankConfig{});
  ASSERT_EQ(bank.size(), 12u);
  const std::vector<std::string> expect = {"identity", "scale(0.9)", "scale(1.1)", "scale(1.2)",
                                           "noise(0.05)", "freq_shift(0.2Hz)", "freq_shift(-0.2Hz)", "slide(0.2s)",
                                           "slide(0.4s)", "slide(0.6s)", "slide(0.8s)", "slide(1s)"};
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(bank[i].Label(), expect[i]);
}

TEST(BuildBank, SubsetsAndErrors) {
  BankConfig c;
  c.kinds = {"identity", "scale", "noise", "freq_shift"};
  EXPECT_EQ(BuildBank(c).size(), 7u);
  c.kinds = {};
  EXPECT_BFT_ERROR(BuildBank(c), ErrorKind::kConfig);
  c.kinds = {"wavelet"};
  EXPECT_BFT_ERROR(BuildBank(c), ErrorKind::kConfig);
  c.kinds = {"scale"};
  c.scales = {};
  EXPECT_BFT_ERROR(BuildBank(c), ErrorKind::kConfig);
  c.scales = {-1.0};
  EXPECT_BFT_ERROR(BuildBank(c), ErrorKind::kConfig);
}

TEST(BuildMasks, TwoBlocks) {
  const auto m = BuildMasks(2, 4);
  EXPECT_EQ(m[0].kept, (std::vector<std::uint8_t>{0, 0, 1, 1}));
  EXPECT_EQ(m[1].kept, (std::vector<std::uint8_t>{1, 1, 0, 0}));
  EXPECT_DOUBLE_EQ(m[0].rate, 0.5);
}

TEST(BuildMasks, TenContiguousBlocks) {
  const auto m = BuildMasks(10, 100);
  for (std::size_t k = 0; k < 10; ++k) {
    EXPECT_EQ(m[k].dropped(), 10u);
    for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(m[k].kept[i], i / 10 == k ? 0 : 1);
  }
}

TEST(BuildMasks, PartitionCount) {
  std::mt19937_64 rng(5);
  for (std::size_t k = 2; k <= 12; ++k)
    for (std::size_t d : {k, k + 1, 2 * k + 3, std::size_t{97}}) {
      for (int variant = 0; variant < 3; ++variant) {
        const auto m = variant == 0 ? BuildMasks(k, d) : variant == 1 ? BuildMasks(k, d, true)
                                                                      : BuildPermutedMasks(k, d, rng);
        ASSERT_EQ(m.size(), k);
        for (std::size_t i = 0; i < d; ++i) {
          std::size_t kept = 0;
          for (const auto& mask : m) kept += mask.kept[i];
          EXPECT_EQ(kept, k - 1);
        }
        for (const auto& mask : m) {
          EXPECT_GE(mask.dropped(), d / k);
          EXPECT_LE(mask.dropped(), (d + k - 1) / k);
        }
      }
    }
  EXPECT_BFT_ERROR(BuildMasks(1, 10), ErrorKind::kContract);
  EXPECT_BFT_ERROR(BuildMasks(5, 4), ErrorKind::kContract);
}

TEST(ApplyMask, Arithmetic) {
  DropoutMask m;
  m.kept = {1, 0};
  m.rate = 0.5;
  const FeatureVector out = ApplyMask(FeatureVector({2.0, 4.0}), m);
  EXPECT_EQ(out.values, (std::vector<double>{4.0, 0.0}));
  DropoutMask all;
  all.kept = {1, 1, 1};
  all.rate = 0.25;
  const FeatureVector s = ApplyMask(FeatureVector({3.0, -1.0, 0.5}), all);
  EXPECT_EQ(s.values, (std::vector<double>{3.0 / 0.75, -1.0 / 0.75, 0.5 / 0.75}));
  EXPECT_BFT_ERROR(ApplyMask(FeatureVector({1.0}), all), ErrorKind::kDimension);
}

TEST(ApplyMask, PartitionMeanPreservesFeature) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  for (std::size_t k : {2u, 5u, 10u}) {
    for (int trial = 0; trial < 100; ++trial) {
      FeatureVector f;
      for (int i = 0; i < 96; ++i) f.values.push_back(g(rng));
      std::vector<double> mean(96, 0.0);
      for (const auto& mask : BuildMasks(k, 96))
        for (std::size_t i = 0; i < 96; ++i) mean[i] += ApplyMask(f, mask)[i] / static_cast<double>(k);
      for (std::size_t i = 0; i < 96; ++i) EXPECT_NEAR(mean[i], f[i], 1e-12);
    }
  }
}

}  // namespace
}  // namespace bft

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
#include <complex>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "bft/aggregate.hpp"
#include "bft/backbone.hpp"
#include "bft/dataset.hpp"
#include "bft/rank.hpp"
#include "bft/transforms.hpp"
#include "test_util.hpp"

namespace bft {
namespace {

double Gain(const std::vector<double>& h, double f_hz, double rate) {
  std::complex<double> g = 0.0;
  for (std::size_t n = 0; n < h.size(); ++n)
    g += h[n] * std::polar(1.0, -2.0 * std::numbers::pi * f_hz / rate * static_cast<double>(n));
  return std::abs(g);
}

TEST(BandPassFir, UnitCentreGainAndStopbands) {
  for (auto [lo, hi] : std::vector<std::pair<double, double>>{{4, 8}, {8, 13}, {13, 20}, {20, 30}}) {
    const std::vector<double> h = BandPassFir(lo, hi, 128.0, 33);
    ASSERT_EQ(h.size(), 33u);
    EXPECT_NEAR(Gain(h, (lo + hi) / 2.0, 128.0), 1.0, 1e-12);
    for (std::size_t n = 0; n < h.size(); ++n) EXPECT_NEAR(h[n], h[h.size() - 1 - n], 1e-15);
    // Hamming transition width is about 3.3 · rate / taps.
    for (double f = 0.0; f <= 64.0; f += 0.5)
      if (f < lo - 13.0 || f > hi + 13.0) {
        EXPECT_LT(Gain(h, f, 128.0), 0.05) << f << " Hz";
      }
  }
  const std::vector<double> wide = BandPassFir(8, 13, 128.0, 129);
  EXPECT_LT(Gain(wide, 30.0, 128.0), 0.01);
  EXPECT_BFT_ERROR(BandPassFir(8, 13, 128.0, 32), ErrorKind::kContract);
  EXPECT_BFT_ERROR(BandPassFir(13, 8, 128.0, 33), ErrorKind::kContract);
  EXPECT_BFT_ERROR(BandPassFir(8, 64, 128.0, 33), ErrorKind::kContract);
}

DatasetSpec Spec(Task task) {
  DatasetSpec s;
  s.task = task;
  s.subjects = 3;
  s.trials_per_subject = 60;
  return s;
}

TEST(PrepareTrainingSet, CropsAndAugments) {
  const auto subjects = GenSyntheticDataset(Spec(Task::kClassification), 1);
  BackboneOptions opts;
  opts.augment_copies = 2;
  const TrainingSet set = PrepareTrainingSet(subjects, opts);
  ASSERT_EQ(set.trials.size(), 3u * 60u * 3u);
  const std::size_t len = TruncatedLength(subjects[0].trials[0]);
  for (const Trial& t : set.trials) EXPECT_EQ(t.samples(), len);
  EXPECT_EQ(set.labels[0], subjects[0].labels[0]);
  EXPECT_EQ(set.labels[2], subjects[0].labels[0]);
  EXPECT_EQ(set.labels[3], subjects[0].labels[1]);
  opts.augment_copies = 0;
  opts.ea = false;
  const TrainingSet plain = PrepareTrainingSet(subjects, opts);
  EXPECT_EQ(plain.trials[5], ApplyTransform(subjects[0].trials[5], TransformSpec::Identity()));
}

double TrainAccuracy(const ModelBundle& m, std::span<const Stream> streams, bool ea) {
  std::size_t hit = 0, n = 0;
  BackboneOptions opts;
  opts.ea = ea;
  opts.augment_copies = 0;
  const TrainingSet set = PrepareTrainingSet(streams, opts);
  for (std::size_t i = 0; i < set.trials.size(); ++i, ++n)
    hit += static_cast<double>(ArgmaxLowest(Forward(m, set.trials[i]).values)) == set.labels[i];
  return static_cast<double>(hit) / static_cast<double>(n);
}

TEST(FitBackbone, ClassifierLearnsAndNormalizes) {
  const auto subjects = GenSyntheticDataset(Spec(Task::kClassification), 2);
  const ModelBundle m = FitBackbone(subjects, BackboneOptions{});
  EXPECT_EQ(m.head_kind(), HeadKind::kClassifier);
  EXPECT_EQ(m.num_outputs(), 2u);
  EXPECT_EQ(m.input_channels(), 8u);
  EXPECT_EQ(m.metadata().at("fitter"), "reference-backbone");
  EXPECT_EQ(m.metadata().at("ea"), true);
  EXPECT_GT(TrainAccuracy(m, subjects, true), 0.8);

  // The first batch norm standardizes the spatial-filter outputs of the
  // unaugmented training data.
  BackboneOptions plain;
  plain.augment_copies = 0;
  const ModelBundle p = FitBackbone(subjects, plain);
  const TrainingSet set = PrepareTrainingSet(subjects, plain);
  std::size_t bn = 0;
  while (p.layers()[bn].spec.kind != LayerKind::kBatchNorm) ++bn;
  const std::size_t maps = p.layers()[bn].spec.out_maps;
  std::vector<double> sum(maps, 0.0), sq(maps, 0.0);
  double count = 0.0;
  for (const Trial& t : set.trials) {
    Activation a = TrialToActivation(t);
    for (std::size_t i = 0; i <= bn; ++i) a = ForwardLayer(p.layers()[i], a);
    const std::size_t plane = a.rows * a.cols;
    for (std::size_t c = 0; c < maps; ++c)
      for (std::size_t j = 0; j < plane; ++j) {
        sum[c] += a.data[c * plane + j];
        sq[c] += a.data[c * plane + j] * a.data[c * plane + j];
      }
    count += static_cast<double>(plane);
  }
  for (std::size_t c = 0; c < maps; ++c) {
    EXPECT_NEAR(sum[c] / count, 0.0, 1e-9);
    EXPECT_NEAR(sq[c] / count, 1.0, 1e-3);
  }
}

TEST(FitBackbone, RegressorTracksTarget) {
  const auto subjects = GenSyntheticDataset(Spec(Task::kRegression), 3);
  BackboneOptions opts;
  opts.augment_copies = 0;
  const ModelBundle m = FitBackbone(subjects, opts);
  EXPECT_EQ(m.head_kind(), HeadKind::kRegressor);
  EXPECT_EQ(m.num_outputs(), 1u);
  const TrainingSet set = PrepareTrainingSet(subjects, opts);
  std::vector<double> pred;
  for (const Trial& t : set.trials) pred.push_back(Forward(m, t).values[0]);
  EXPECT_GT(SpearmanRho(pred, set.labels), 0.5);
}

TEST(FitBackbone, Errors) {
  EXPECT_BFT_ERROR(FitBackbone(std::vector<Stream>{}, BackboneOptions{}), ErrorKind::kData);
  auto subjects = GenSyntheticDataset(Spec(Task::kClassification), 4);
  std::vector<Stream> mixed = {subjects[0], GenSyntheticDataset(Spec(Task::kRegression), 4)[1]};
  EXPECT_BFT_ERROR(FitBackbone(mixed, BackboneOptions{}), ErrorKind::kData);
  Stream one = subjects[0];
  std::fill(one.labels.begin(), one.labels.end(), 1.0);
  BackboneOptions opts;
  opts.augment_copies = 0;
  EXPECT_BFT_ERROR(FitBackbone(std::vector<Stream>{one}, opts), ErrorKind::kData);
  opts.bands.clear();
  EXPECT_BFT_ERROR(FitBackbone(subjects, opts), ErrorKind::kConfig);
}

}  // namespace
}  // namespace bft

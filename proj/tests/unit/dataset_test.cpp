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
#include <fstream>
#include <vector>

#include <gtest/gtest.h>

#include "bft/aggregate.hpp"
#include "bft/alignment.hpp"
#include "bft/backbone.hpp"
#include "bft/dataset.hpp"
#include "bft/transforms.hpp"
#include "test_util.hpp"

namespace bft {
namespace {

DatasetSpec SmallSpec() {
  DatasetSpec s;
  s.subjects = 3;
  s.trials_per_subject = 20;
  return s;
}

TEST(Dataset, FixedSeedIsBitIdentical) {
  const auto a = GenSyntheticDataset(SmallSpec(), 7);
  const auto b = GenSyntheticDataset(SmallSpec(), 7);
  const auto c = GenSyntheticDataset(SmallSpec(), 8);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t s = 0; s < a.size(); ++s) {
    ASSERT_EQ(a[s].size(), 20u);
    EXPECT_EQ(a[s].labels, b[s].labels);
    for (std::size_t i = 0; i < a[s].size(); ++i)
      EXPECT_EQ(a[s].trials[i].data().values(), b[s].trials[i].data().values());
  }
  EXPECT_NE(a[0].trials[0].data().values(), c[0].trials[0].data().values());
}

TEST(Dataset, ShapesAndLabels) {
  DatasetSpec spec = SmallSpec();
  spec.classes = 3;
  const auto subjects = GenSyntheticDataset(spec, 1);
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    const Stream& st = subjects[s];
    EXPECT_EQ(st.subject, static_cast<int>(s));
    EXPECT_EQ(st.classes, 3u);
    for (std::size_t i = 0; i < st.size(); ++i) {
      EXPECT_EQ(st.trials[i].channels(), 8u);
      EXPECT_EQ(st.trials[i].samples(), 512u);
      EXPECT_TRUE(st.trials[i].AllFinite());
      EXPECT_GE(st.labels[i], 0.0);
      EXPECT_LT(st.labels[i], 3.0);
      EXPECT_EQ(st.labels[i], std::floor(st.labels[i]));
    }
  }
  spec.task = Task::kRegression;
  const auto reg = GenSyntheticDataset(spec, 1);
  double var = 0.0, mean = 0.0;
  for (double y : reg[0].labels) mean += y / reg[0].size();
  for (double y : reg[0].labels) var += (y - mean) * (y - mean);
  EXPECT_GT(var, 0.0);
}

TEST(DatasetSpec, ValidateRejects) {
  const auto bad = [](auto mutate) {
    DatasetSpec s;
    mutate(s);
    EXPECT_BFT_ERROR(s.Validate(), ErrorKind::kConfig);
  };
  bad([](DatasetSpec& s) { s.channels = 1; });
  bad([](DatasetSpec& s) { s.classes = 1; });
  bad([](DatasetSpec& s) { s.subjects = 0; });
  bad([](DatasetSpec& s) { s.band_hz = {8.0, 70.0}; });
  bad([](DatasetSpec& s) { s.mixing_shift = -0.1; });
  bad([](DatasetSpec& s) { s.onset_s = {2.0, 3.9}; });
  bad([](DatasetSpec& s) { s.artifact_rate = 1.5; });
  EXPECT_BFT_ERROR(GenSyntheticDataset([] {
    DatasetSpec s;
    s.rate_hz = 0.0;
    return s;
  }(), 0), ErrorKind::kConfig);
}

TEST(DatasetSpec, JsonRoundTripAndStrictKeys) {
  DatasetSpec s;
  s.task = Task::kRegression;
  s.channels = 6;
  s.mixing_shift = 0.25;
  s.band_hz = {10.0, 20.0};
  const DatasetSpec back = DatasetSpec::FromJson(s.ToJson());
  EXPECT_EQ(back.ToJson(), s.ToJson());
  EXPECT_EQ(DatasetSpec::FromJson(nlohmann::json::object()).ToJson(), DatasetSpec{}.ToJson());
  EXPECT_BFT_ERROR(DatasetSpec::FromJson({{"chanels", 4}}), ErrorKind::kConfig);
  EXPECT_BFT_ERROR(DatasetSpec::FromJson({{"channels", "four"}}), ErrorKind::kConfig);
  EXPECT_BFT_ERROR(DatasetSpec::FromJson({{"task", "ranking"}}), ErrorKind::kConfig);
}

TEST(StreamDir, RoundTripIsExact) {
  const Stream s = GenSyntheticDataset(SmallSpec(), 3)[1];
  testing::TempDir dir("stream");
  WriteStreamDir(dir.path() / "s", s);
  const Stream back = ReadStreamDir(dir.path() / "s");
  EXPECT_EQ(back.task, s.task);
  EXPECT_EQ(back.classes, s.classes);
  EXPECT_EQ(back.subject, s.subject);
  EXPECT_EQ(back.labels, s.labels);
  ASSERT_EQ(back.size(), s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(back.trials[i].data().values(), s.trials[i].data().values());
    EXPECT_EQ(back.trials[i].rate_hz(), s.trials[i].rate_hz());
  }
}

TEST(StreamDir, Errors) {
  const Stream s = GenSyntheticDataset(SmallSpec(), 3)[0];
  testing::TempDir dir("stream_err");
  EXPECT_BFT_ERROR(ReadStreamDir(dir.path() / "missing"), ErrorKind::kLoad);
  WriteStreamDir(dir.path() / "s", s);
  std::filesystem::resize_file(dir.path() / "s" / "trial_00004.bin", 100);
  try {
    ReadStreamDir(dir.path() / "s");
    FAIL() << "truncated trial accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kLoad);
    EXPECT_NE(std::string(e.what()).find("trial 4"), std::string::npos) << e.what();
  }
  std::ofstream(dir.path() / "s" / "index.json") << "{\"version\": 2}";
  EXPECT_BFT_ERROR(ReadStreamDir(dir.path() / "s"), ErrorKind::kLoad);
  Stream empty = s;
  empty.trials.clear();
  empty.labels.clear();
  EXPECT_BFT_ERROR(WriteStreamDir(dir.path() / "e", empty), ErrorKind::kData);
}

TEST(DatasetDir, WritesSubjectsAndSpec) {
  const DatasetSpec spec = SmallSpec();
  const auto subjects = GenSyntheticDataset(spec, 5);
  testing::TempDir dir("dataset");
  WriteDatasetDir(dir.path(), spec, 5, subjects);
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    const Stream back = ReadStreamDir(dir.path() / ("subject_0" + std::to_string(s)));
    EXPECT_EQ(back.labels, subjects[s].labels);
  }
  std::ifstream in(dir.path() / "spec.json");
  const nlohmann::json j = nlohmann::json::parse(in);
  EXPECT_EQ(j.at("seed").get<std::uint64_t>(), 5u);
}

// Accuracy of the backbone fitted on `train` over `test`, with the test
// stream aligned offline when `ea` is set.
double Accuracy(std::span<const Stream> train, const Stream& test, bool ea) {
  BackboneOptions opts;
  opts.ea = ea;
  opts.augment_copies = 0;
  const ModelBundle m = FitBackbone(train, opts);
  const std::vector<Trial> trials = ea ? EaAlignSet(test.trials) : test.trials;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const Prediction p = Forward(m, ApplyTransform(trials[i], TransformSpec::Identity()));
    hit += static_cast<double>(ArgmaxLowest(p.values)) == test.labels[i];
  }
  return static_cast<double>(hit) / static_cast<double>(trials.size());
}

Stream Slice(const Stream& s, std::size_t lo, std::size_t hi) {
  Stream out = s;
  out.trials.assign(s.trials.begin() + static_cast<std::ptrdiff_t>(lo), s.trials.begin() + static_cast<std::ptrdiff_t>(hi));
  out.labels.assign(s.labels.begin() + static_cast<std::ptrdiff_t>(lo), s.labels.begin() + static_cast<std::ptrdiff_t>(hi));
  return out;
}

TEST(Dataset, NoShiftControlLosoMatchesWithinSubject) {
  DatasetSpec spec;
  spec.subjects = 4;
  spec.trials_per_subject = 80;
  spec.mixing_shift = 0.0;
  spec.spectral_tilt = 0.0;
  spec.amplitude_shift = 0.0;
  double gap = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto subjects = GenSyntheticDataset(spec, seed);
    // Held-out subject 0 versus a within-subject split of the same data.
    const std::vector<Stream> others(subjects.begin() + 1, subjects.end());
    const double loso = Accuracy(others, Slice(subjects[0], 40, 80), false);
    std::vector<Stream> within = others;
    within.push_back(Slice(subjects[0], 0, 40));
    const double ws = Accuracy(within, Slice(subjects[0], 40, 80), false);
    gap += (ws - loso) / 3.0;
  }
  EXPECT_LT(std::abs(gap), 0.05);
}

TEST(Dataset, EaRecoversMixingShift) {
  DatasetSpec spec;
  spec.subjects = 5;
  spec.trials_per_subject = 80;
  spec.spectral_tilt = 0.0;
  spec.amplitude_shift = 0.0;
  spec.mixing_shift = 0.8;
  double with_ea = 0.0, without = 0.0;
  for (std::uint64_t seed : {1, 2}) {
    const auto subjects = GenSyntheticDataset(spec, seed);
    for (std::size_t held = 0; held < subjects.size(); ++held) {
      std::vector<Stream> train;
      for (std::size_t s = 0; s < subjects.size(); ++s)
        if (s != held) train.push_back(subjects[s]);
      with_ea += Accuracy(train, subjects[held], true);
      without += Accuracy(train, subjects[held], false);
    }
  }
  EXPECT_GT(with_ea, without);
}

}  // namespace
}  // namespace bft

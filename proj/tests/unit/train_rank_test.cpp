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

#include <fstream>
#include <vector>

#include <gtest/gtest.h>

#include "bft/alignment.hpp"
#include "bft/backbone.hpp"
#include "bft/dataset.hpp"
#include "bft/harness.hpp"
#include "bft/train_rank.hpp"
#include "test_util.hpp"

namespace bft {
namespace {

struct Source {
  ModelBundle model;
  std::vector<Stream> streams;
};

const Source& Src() {
  static const Source s = [] {
    DatasetSpec spec;
    spec.subjects = 3;
    spec.trials_per_subject = 16;
    Source out;
    out.streams = GenSyntheticDataset(spec, 31);
    BackboneOptions opts;
    opts.augment_copies = 0;
    out.model = FitBackbone(out.streams, opts);
    return out;
  }();
  return s;
}

RankTrainConfig Small() {
  RankTrainConfig c;
  c.mapping.arch = MappingArch::kFeedForward;
  c.mapping.ff_hidden = 16;
  c.mapping_samples = 400;
  c.mapping_train.epochs = 3;
  c.ranking_train.epochs = 5;
  return c;
}

TEST(CollectRankingData, ShapesAndLosses) {
  const Source& s = Src();
  const RankTrainConfig cfg = Small();
  const RankingData d = CollectRankingData(s.model, s.streams, cfg);
  ASSERT_EQ(d.feats.size(), 48u);
  ASSERT_EQ(d.labels.size(), 48u);
  for (std::size_t i = 0; i < 48; ++i) {
    EXPECT_EQ(d.feats[i].size(), 12u);
    EXPECT_EQ(d.labels[i].size(), 12u);
  }
  // Branch 0 is the identity transform of the aligned trial.
  const std::vector<Trial> aligned = EaAlignSet(s.streams[1].trials);
  const Prediction p = Forward(s.model, ApplyTransform(aligned[3], TransformSpec::Identity()));
  EXPECT_NEAR(d.labels[16 + 3][0], BranchLoss(Task::kClassification, p, s.streams[1].labels[3]), 1e-12);

  RankTrainConfig drop = cfg;
  drop.branches = BranchMode::kDropout;
  drop.masks = 5;
  const RankingData dd = CollectRankingData(s.model, s.streams, drop);
  EXPECT_EQ(dd.feats[0].size(), 5u);
}

TEST(TrainRankHead, VariantsAndMappingReuse) {
  const Source& s = Src();
  RankTrainConfig cfg = Small();
  const RankingData d = CollectRankingData(s.model, s.streams, cfg);
  const RankHead full = TrainRankHead(d, cfg);
  EXPECT_EQ(full.variant, RankVariant::kFull);
  EXPECT_EQ(full.mapping.k(), 12u);
  EXPECT_EQ(full.ranking.dim(), s.model.feature_dim());
  const RankHead again = TrainRankHead(d, cfg, &full.mapping);
  EXPECT_EQ(std::vector<double>(again.mapping.params().begin(), again.mapping.params().end()),
            std::vector<double>(full.mapping.params().begin(), full.mapping.params().end()));
  EXPECT_EQ(again.ranking, full.ranking);

  cfg.variant = RankVariant::kInverseRank;
  const RankHead inv = TrainRankHead(d, cfg);
  EXPECT_EQ(inv.variant, RankVariant::kInverseRank);
  EXPECT_EQ(inv.mapping.num_params(), 0u);

  cfg.variant = RankVariant::kFull;
  MappingConfig mc = cfg.mapping;
  mc.k = 5;
  const MappingModel wrong(mc, 1);
  EXPECT_BFT_ERROR(TrainRankHead(d, cfg, &wrong), ErrorKind::kConfig);
  EXPECT_BFT_ERROR(TrainRankHead(RankingData{}, cfg), ErrorKind::kData);
}

TEST(RankTrainConfig, StrictJson) {
  const RankTrainConfig c = RankTrainConfig::FromJson(
      {{"model", "m.bftw"}, {"streams", {"a", "/abs/b"}}, {"output", "h.bftw"}, {"variant", "inverse-loss"},
       {"mapping", {{"arch", "feedforward"}, {"samples", 100}, {"train", {{"epochs", 2}}}}}},
      "/base");
  EXPECT_EQ(c.model_path, std::filesystem::path("/base/m.bftw"));
  ASSERT_EQ(c.streams.size(), 2u);
  EXPECT_EQ(c.streams[1], std::filesystem::path("/abs/b"));
  EXPECT_EQ(c.variant, RankVariant::kInverseLoss);
  EXPECT_EQ(c.mapping.arch, MappingArch::kFeedForward);
  EXPECT_EQ(c.mapping_samples, 100u);
  EXPECT_EQ(c.mapping_train.epochs, 2u);
  EXPECT_EQ(c.mapping_train.lr, 3e-3);
  EXPECT_BFT_ERROR(RankTrainConfig::FromJson({{"modle", "m"}}), ErrorKind::kConfig);
  EXPECT_BFT_ERROR(RankTrainConfig::FromJson({{"mapping", {{"layers", 3}}}}), ErrorKind::kConfig);
  EXPECT_BFT_ERROR(RankTrainConfig::FromJson({{"ranking", {{"momentum", 0.9}}}}), ErrorKind::kConfig);
  EXPECT_BFT_ERROR(RankTrainConfig::FromJson({{"branches", "both"}}), ErrorKind::kConfig);
  EXPECT_BFT_ERROR(RankTrainConfig::FromJson({{"branches", "dropout"}, {"masks", {{"k", 1}}}}), ErrorKind::kConfig);
  EXPECT_BFT_ERROR(TrainRankHeadFromConfig(RankTrainConfig{}), ErrorKind::kConfig);
}

TEST(TrainRankHeadFromConfig, WritesUsableHead) {
  const Source& s = Src();
  testing::TempDir dir("train_rank");
  SaveModelFile(dir.path() / "model.bftw", s.model);
  WriteStreamDir(dir.path() / "s0", s.streams[0]);
  WriteStreamDir(dir.path() / "s1", s.streams[1]);
  const nlohmann::json j = {{"model", "model.bftw"},
                            {"streams", {"s0", "s1"}},
                            {"output", "head.bftw"},
                            {"mapping", {{"arch", "feedforward"}, {"ff_hidden", 16}, {"samples", 400}, {"train", {{"epochs", 3}}}}},
                            {"ranking", {{"epochs", 5}}}};
  std::ofstream(dir.path() / "rank.json") << j.dump();
  const RankHead h = TrainRankHeadFromConfig(RankTrainConfig::Load(dir.path() / "rank.json"));
  const RankHead back = LoadRankHeadFile(dir.path() / "head.bftw");
  EXPECT_EQ(back.ranking, h.ranking);
  EXPECT_EQ(back.mapping.k(), 12u);

  StreamConfig run;
  run.mode = Mode::kBftA;
  const ModelBundle m = LoadModelFile(dir.path() / "model.bftw");
  const EvalReport r = RunStream(run, {&m, &back, nullptr}, s.streams[2]);
  EXPECT_EQ(r.trials.size(), s.streams[2].size());

  const nlohmann::json reuse = {{"model", "model.bftw"},
                                {"streams", {"s1"}},
                                {"output", "head2.bftw"},
                                {"mapping", {{"from", "head.bftw"}}},
                                {"ranking", {{"epochs", 2}}}};
  std::ofstream(dir.path() / "rank2.json") << reuse.dump();
  const RankHead h2 = TrainRankHeadFromConfig(RankTrainConfig::Load(dir.path() / "rank2.json"));
  EXPECT_EQ(std::vector<double>(h2.mapping.params().begin(), h2.mapping.params().end()),
            std::vector<double>(back.mapping.params().begin(), back.mapping.params().end()));
}

}  // namespace
}  // namespace bft

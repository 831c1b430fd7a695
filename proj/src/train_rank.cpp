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

#include "bft/train_rank.hpp"

#include <fstream>

#include "bft/alignment.hpp"
#include "bft/error.hpp"
#include "bft/harness.hpp"

namespace bft {
namespace {

std::filesystem::path Resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.empty() || path.is_absolute() || base.empty()) return path;
  return base / path;
}

TrainOptions TrainOptionsFromJson(const nlohmann::json& j, TrainOptions o, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    if (k == "lr") o.lr = v;
    else if (k == "epochs") o.epochs = v;
    else if (k == "batch") o.batch = v;
    else if (k == "val_fraction") o.val_fraction = v;
    else if (k == "patience") o.patience = v;
    else if (k == "seed") o.seed = v;
    else Fail(ErrorKind::kConfig, "unknown " + where + " key '" + k + "'");
  }
  return o;
}

}  // namespace

RankTrainConfig RankTrainConfig::FromJson(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  RankTrainConfig c;
  try {
    if (!j.is_object()) Fail(ErrorKind::kConfig, "config must be an object");
    for (const auto& [key, value] : j.items()) {
      if (key == "model") c.model_path = Resolve(base_dir, value.get<std::string>());
      else if (key == "streams") {
        for (const auto& s : value) c.streams.push_back(Resolve(base_dir, s.get<std::string>()));
      } else if (key == "output") c.output_path = Resolve(base_dir, value.get<std::string>());
      else if (key == "branches") {
        const std::string b = value.get<std::string>();
        if (b == "augment") c.branches = BranchMode::kAugment;
        else if (b == "dropout") c.branches = BranchMode::kDropout;
        else Fail(ErrorKind::kConfig, "unknown branches '" + b + "'");
      } else if (key == "bank") c.bank = BankConfigFromJson(value);
      else if (key == "masks") {
        for (const auto& [k, v] : value.items()) {
          if (k == "k") c.masks = v;
          else if (k == "strided") c.strided_masks = v;
          else Fail(ErrorKind::kConfig, "unknown masks key '" + k + "'");
        }
      } else if (key == "ea") c.ea = value;
      else if (key == "variant") c.variant = ParseRankVariant(value.get<std::string>());
      else if (key == "rank_target") {
        const std::string t = value.get<std::string>();
        if (t == "task-ranks") c.target = RankTarget::kTaskRanks;
        else if (t == "mapped-losses") c.target = RankTarget::kMappedLosses;
        else Fail(ErrorKind::kConfig, "unknown rank_target '" + t + "'");
      } else if (key == "mapping") {
        for (const auto& [k, v] : value.items()) {
          if (k == "from") c.mapping_from = Resolve(base_dir, v.get<std::string>());
          else if (k == "arch") {
            const std::string a = v.get<std::string>();
            if (a == "bilstm") c.mapping.arch = MappingArch::kBiLstm;
            else if (a == "feedforward") c.mapping.arch = MappingArch::kFeedForward;
            else Fail(ErrorKind::kConfig, "unknown mapping arch '" + a + "'");
          } else if (k == "hidden") c.mapping.hidden = v;
          else if (k == "ff_hidden") c.mapping.ff_hidden = v;
          else if (k == "samples") c.mapping_samples = v;
          else if (k == "min_scale") c.synthetic.min_scale = v;
          else if (k == "max_scale") c.synthetic.max_scale = v;
          else if (k == "train") c.mapping_train = TrainOptionsFromJson(v, c.mapping_train, "mapping.train");
          else Fail(ErrorKind::kConfig, "unknown mapping key '" + k + "'");
        }
      } else if (key == "ranking") c.ranking_train = TrainOptionsFromJson(value, c.ranking_train, "ranking");
      else if (key == "seed") c.seed = value;
      else Fail(ErrorKind::kConfig, "unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kConfig, std::string("malformed config: ") + e.what());
  }
  if (c.branches == BranchMode::kDropout) Require(c.masks >= 2, ErrorKind::kConfig, "masks.k must be ≥ 2");
  return c;
}

RankTrainConfig RankTrainConfig::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kConfig, "cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kConfig, "config " + path.string() + " is not valid JSON: " + e.what());
  }
  return FromJson(j, path.parent_path());
}

RankingData CollectRankingData(const ModelBundle& model, std::span<const Stream> streams, const RankTrainConfig& cfg) {
  RankingData data;
  const std::size_t samples = model.input_samples();
  const std::vector<TransformSpec> bank = cfg.branches == BranchMode::kAugment ? BuildBank(cfg.bank)
                                                                               : std::vector<TransformSpec>{};
  const std::vector<DropoutMask> masks = cfg.branches == BranchMode::kDropout
                                             ? BuildMasks(cfg.masks, model.feature_dim(), cfg.strided_masks)
                                             : std::vector<DropoutMask>{};
  std::size_t global = 0;
  for (const Stream& s : streams) {
    Require(!s.trials.empty(), ErrorKind::kData, "empty source stream");
    const std::vector<Trial> aligned = cfg.ea ? EaAlignSet(s.trials) : s.trials;
    for (std::size_t i = 0; i < aligned.size(); ++i, ++global) {
      std::vector<FeatureVector> feats;
      std::vector<double> losses;
      if (cfg.branches == BranchMode::kAugment) {
        for (const TransformSpec& spec : bank) {
          TransformSpec t = spec;
          if (t.kind == TransformKind::kNoise) t.seed = TrialNoiseSeed(spec.seed ^ cfg.seed, global);
          feats.push_back(Features(model, ApplyTransform(aligned[i], t, samples)));
        }
      } else {
        const FeatureVector f = Features(model, ApplyTransform(aligned[i], TransformSpec::Identity(), samples));
        for (const DropoutMask& m : masks) feats.push_back(ApplyMask(f, m));
      }
      for (const FeatureVector& f : feats) {
        const double loss = BranchLoss(s.task, Head(model, f), s.labels[i]);
        Require(std::isfinite(loss), ErrorKind::kNumerical, "non-finite branch loss on source trial " + std::to_string(i));
        losses.push_back(loss);
      }
      data.feats.push_back(std::move(feats));
      data.labels.push_back(std::move(losses));
    }
  }
  return data;
}

MappingModel TrainSyntheticMapping(std::size_t k, const RankTrainConfig& cfg, TrainReport* report) {
  MappingConfig mc = cfg.mapping;
  mc.k = k;
  const std::vector<SyntheticRankSample> synth = GenSynthetic(cfg.mapping_samples, k, cfg.seed ^ 0x6d6170ULL, cfg.synthetic);
  TrainOptions o = cfg.mapping_train;
  o.seed ^= cfg.seed;
  return TrainMapping(synth, mc, o, report);
}

RankHead TrainRankHead(const RankingData& data, const RankTrainConfig& cfg, const MappingModel* mapping) {
  Require(!data.feats.empty(), ErrorKind::kData, "no ranking data");
  const std::size_t k = data.feats.front().size();
  RankHead head;
  head.variant = cfg.variant;
  TrainOptions ro = cfg.ranking_train;
  ro.seed ^= cfg.seed;
  if (cfg.variant != RankVariant::kFull) {
    head.ranking = TrainLossRegressor(data, ro);
    return head;
  }
  head.mapping = mapping ? *mapping : TrainSyntheticMapping(k, cfg);
  Require(head.mapping.k() == k, ErrorKind::kConfig,
          "mapping module expects " + std::to_string(head.mapping.k()) + " branches, data has " + std::to_string(k));
  RankingData ranked;
  ranked.feats = data.feats;
  ranked.labels.reserve(data.labels.size());
  for (const std::vector<double>& losses : data.labels) {
    if (cfg.target == RankTarget::kTaskRanks) {
      ranked.labels.push_back(TaskRankLabels(losses));
    } else {
      std::vector<double> neg(losses.size());
      for (std::size_t i = 0; i < losses.size(); ++i) neg[i] = -losses[i];
      ranked.labels.push_back(MapRanks(head.mapping, Softmax(neg)));
    }
  }
  head.ranking = TrainRanking(ranked, head.mapping, ro);
  return head;
}

RankHead TrainRankHeadFromConfig(const RankTrainConfig& cfg) {
  Require(!cfg.model_path.empty(), ErrorKind::kConfig, "config names no model");
  Require(!cfg.streams.empty(), ErrorKind::kConfig, "config names no source streams");
  Require(!cfg.output_path.empty(), ErrorKind::kConfig, "config names no output");
  const ModelBundle model = LoadModelFile(cfg.model_path);
  std::vector<Stream> streams;
  for (const auto& p : cfg.streams) streams.push_back(ReadStreamDir(p));
  const RankingData data = CollectRankingData(model, streams, cfg);
  std::optional<MappingModel> mapping;
  if (!cfg.mapping_from.empty()) mapping = LoadRankHeadFile(cfg.mapping_from).mapping;
  RankHead head = TrainRankHead(data, cfg, mapping ? &*mapping : nullptr);
  SaveRankHeadFile(cfg.output_path, head);
  return head;
}

}  // namespace bft

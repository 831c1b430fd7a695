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

// Fitting a rank head against a frozen backbone on labeled source streams.

#ifndef BFT_TRAIN_RANK_HPP_
#define BFT_TRAIN_RANK_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bft/dataset.hpp"
#include "bft/model.hpp"
#include "bft/rank.hpp"
#include "bft/theory.hpp"
#include "bft/transforms.hpp"

namespace bft {

enum class RankTarget {
  kTaskRanks,     // average ranks of the per-branch losses
  kMappedLosses,  // m(softmax(−losses))
};

struct RankTrainConfig {
  std::filesystem::path model_path;
  std::vector<std::filesystem::path> streams;
  std::filesystem::path output_path;
  BranchMode branches = BranchMode::kAugment;
  BankConfig bank;
  std::size_t masks = 10;
  bool strided_masks = false;
  bool ea = true;
  RankVariant variant = RankVariant::kFull;
  RankTarget target = RankTarget::kTaskRanks;
  /// Rank-head file whose mapping module is reused; trained from synthetic
  /// data when empty.
  std::filesystem::path mapping_from;
  MappingConfig mapping;
  std::size_t mapping_samples = 5000;
  SyntheticOptions synthetic;
  TrainOptions mapping_train{.lr = 3e-3, .epochs = 30, .batch = 64, .val_fraction = 0.1, .patience = 10, .seed = 0};
  TrainOptions ranking_train;
  std::uint64_t seed = 0;

  static RankTrainConfig FromJson(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static RankTrainConfig Load(const std::filesystem::path& path);
};

/// Branch features and raw per-branch task losses for every source trial.
/// Each stream is EA-aligned on its own when `ea` is set.
RankingData CollectRankingData(const ModelBundle& model, std::span<const Stream> streams, const RankTrainConfig& cfg);

/// Mapping module trained on synthetic rank data, sized for `k` branches.
MappingModel TrainSyntheticMapping(std::size_t k, const RankTrainConfig& cfg, TrainReport* report = nullptr);

/// Fits the head. `mapping` (full variant only) is reused when given,
/// otherwise trained from synthetic data.
RankHead TrainRankHead(const RankingData& data, const RankTrainConfig& cfg, const MappingModel* mapping = nullptr);

/// Loads the model and streams named by the config, trains and writes the
/// rank-head file.
RankHead TrainRankHeadFromConfig(const RankTrainConfig& cfg);

}  // namespace bft

#endif  // BFT_TRAIN_RANK_HPP_

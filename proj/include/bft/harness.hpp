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

// Prequential stream evaluation: every trial is predicted before any later
// trial is seen, then scored.

#ifndef BFT_HARNESS_HPP_
#define BFT_HARNESS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bft/alignment.hpp"
#include "bft/dataset.hpp"
#include "bft/model.hpp"
#include "bft/quant.hpp"
#include "bft/rank.hpp"
#include "bft/transforms.hpp"

namespace bft {

enum class Mode { kBftA, kBftD, kBaseline, kAugMean, kMcDropout, kAblationV1, kAblationV2 };

const char* ModeName(Mode m);
Mode ParseMode(const std::string& name);

/// Whether the mode draws its branches from the transform bank (as opposed
/// to dropout masks or the single identity branch).
bool UsesBank(Mode m);
bool UsesMasks(Mode m);
/// Whether the mode needs a rank-head file.
bool UsesRankHead(Mode m);

enum class NoiseKind { kNone, kTemporal, kSpatial };

const char* NoiseKindName(NoiseKind k);
NoiseKind ParseNoiseKind(const std::string& name);

struct NoiseSpec {
  NoiseKind kind = NoiseKind::kNone;
  std::pair<double, double> window_s = {1.5, 2.0};  // temporal only
  double ratio = 1.0;  // std as a multiple of the channel's std
  std::uint64_t seed = 0;

  /// Throws kRange when the temporal window does not fit `duration_s`.
  void Validate(double duration_s) const;
};

/// Temporal: Gaussian noise on every channel over the window. Spatial: one
/// channel, drawn from the seed, corrupted over the whole trial.
Trial InjectNoise(const Trial& trial, const NoiseSpec& spec);

/// Per-trial noise seed derived from the stream seed and the trial index.
std::uint64_t TrialNoiseSeed(std::uint64_t seed, std::size_t index);

/// Strict parsing of the transform-bank block; absent keys keep defaults.
BankConfig BankConfigFromJson(const nlohmann::json& j);
nlohmann::json BankConfigToJson(const BankConfig& b);

struct StreamConfig {
  Mode mode = Mode::kBftA;
  Task task = Task::kClassification;
  std::filesystem::path model_path;
  std::filesystem::path rank_head_path;
  std::filesystem::path stream_path;
  std::filesystem::path report_path;
  std::filesystem::path csv_path;
  double tau = 0.5;
  BankConfig bank;
  std::size_t masks = 10;
  bool strided_masks = false;
  bool ea = true;
  EaUpdateOrder ea_order = EaUpdateOrder::kUpdateThenAlign;
  std::optional<double> ea_eps;
  bool bn_adapt = false;
  std::size_t bn_window = 8;
  double bn_momentum = 0.1;
  bool quantized = false;
  std::filesystem::path quant_model_path;
  NoiseSpec noise;
  /// Replaces the rank-head weights by 1/K (classification) or the plain
  /// branch mean (regression).
  bool force_uniform_weights = false;
  std::size_t ndcg_k = 6;
  std::uint64_t seed = 0;

  /// Throws kConfig on an invalid combination.
  void Validate() const;
  nlohmann::json ToJson() const;
  /// Strict: unknown keys are config errors. Relative paths resolve against
  /// `base_dir`.
  static StreamConfig FromJson(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static StreamConfig Load(const std::filesystem::path& path);
};

struct Latency {
  double align_ms = 0.0;  // EA update/align and BN-adapt
  double transform_ms = 0.0;
  double forward_ms = 0.0;
  double rank_ms = 0.0;
  double aggregate_ms = 0.0;

  double total_ms() const { return align_ms + transform_ms + forward_ms + rank_ms + aggregate_ms; }
};

struct TrialRecord {
  std::size_t index = 0;
  double label = 0.0;
  double prediction = 0.0;  // class index or regression value
  std::vector<double> probs;    // classification
  std::vector<double> weights;  // aggregation weights (regression: reliability scores)
  std::vector<double> branch_losses;
  std::optional<double> ndcg;
  Latency latency;
};

struct Metrics {
  std::size_t n = 0;
  std::optional<double> accuracy;  // classification
  std::optional<double> cc;        // regression; empty when undefined
  bool cc_defined = true;
  std::optional<double> rmse;
  std::optional<double> ndcg_mean;
  std::optional<double> ndcg_median;
};

struct EvalReport {
  StreamConfig config;
  std::size_t branches = 0;
  std::vector<TrialRecord> trials;
  Metrics metrics;
  Latency mean_latency;
};

/// Fraction of equal entries.
double Accuracy(std::span<const double> preds, std::span<const double> labels);
/// Pearson correlation; empty when either series has zero variance.
std::optional<double> PearsonCc(std::span<const double> a, std::span<const double> b);
double Rmse(std::span<const double> preds, std::span<const double> labels);

/// NDCG@k of the ordering by descending `scores` (ties to the lower index)
/// against relevance K − rank + 1, where rank is TaskRankLabels(losses).
double NdcgAtK(std::span<const double> scores, std::span<const double> losses, std::size_t k);

Metrics ComputeMetrics(Task task, std::span<const TrialRecord> trials);

/// Per-branch task loss: cross-entropy of softmax(logits) or squared error.
double BranchLoss(Task task, const Prediction& p, double label);

/// Model-side inputs of one run. `head` is required by the rank-head modes,
/// `quant` when cfg.quantized.
struct StreamInputs {
  const ModelBundle* model = nullptr;
  const RankHead* head = nullptr;
  const QuantModel* quant = nullptr;
};

EvalReport RunStream(const StreamConfig& cfg, const StreamInputs& in, const Stream& stream);

/// Loads every file named by the config, runs, and writes the report files
/// that are configured.
EvalReport RunStreamFromConfig(const StreamConfig& cfg);

nlohmann::json ReportToJson(const EvalReport& r);
void WriteReportJson(const std::filesystem::path& path, const EvalReport& r);
void WriteReportCsv(const std::filesystem::path& path, const EvalReport& r);

}  // namespace bft

#endif  // BFT_HARNESS_HPP_

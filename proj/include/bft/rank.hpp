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

// Learning-to-rank reliability head.
//
// A mapping network m turns a weight vector on the simplex into rank-like
// reals and is trained once on synthetic vectors. A dense ranking layer r
// scores each branch's features; softmax of the scores gives the weights and
// r is trained so that m(weights) matches the task-loss ranks, with m frozen.
//
// Rank convention everywhere: rank 1 is the most reliable branch, i.e. the
// largest weight or the lowest task loss. Ties receive their average rank.

#ifndef BFT_RANK_HPP_
#define BFT_RANK_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bft/container.hpp"
#include "bft/transforms.hpp"

namespace bft {

/// Average ranks (1-based). `descending` gives rank 1 to the largest value.
std::vector<double> AverageRanks(std::span<const double> values, bool descending);

/// Ranks of per-branch task losses: lowest loss is rank 1.
std::vector<double> TaskRankLabels(std::span<const double> losses);

enum class SyntheticFamily { kUniform, kNormal, kEvenlySpaced, kMixture };

const char* SyntheticFamilyName(SyntheticFamily f);

struct SyntheticRankSample {
  std::vector<double> x;   // on the simplex, each entry in [0, 1]
  std::vector<double> pi;  // AverageRanks(x, descending)
  SyntheticFamily family = SyntheticFamily::kUniform;
};

struct SyntheticOptions {
  /// Raw draws are pushed through softmax(scale · v) with log-uniform scale.
  double min_scale = 1.0;
  double max_scale = 8.0;
};

/// Families are drawn with equal probability: uniform on [−1, 1], N(0, 1),
/// shuffled evenly spaced points over a random sub-range of [−1, 1], and an
/// element-wise mixture of the three.
std::vector<SyntheticRankSample> GenSynthetic(std::size_t n, std::size_t k, std::uint64_t seed,
                                              const SyntheticOptions& opts = {});

enum class MappingArch { kBiLstm, kFeedForward };

struct MappingConfig {
  MappingArch arch = MappingArch::kBiLstm;
  std::size_t k = 12;
  std::size_t hidden = 32;     // LSTM state size per direction
  std::size_t ff_hidden = 64;  // both hidden layers of the feed-forward variant
};

/// K inputs to K rank-like outputs. Inputs are fed as log(K·x + 1e-6), so
/// uniform weights map to zero whatever K is and the order of the inputs is
/// linear in the underlying scores.
class MappingModel {
 public:
  MappingModel() = default;
  MappingModel(const MappingConfig& config, std::uint64_t seed);

  const MappingConfig& config() const { return config_; }
  std::size_t k() const { return config_.k; }
  std::size_t num_params() const { return params_.size(); }
  std::span<const double> params() const { return params_; }
  std::span<double> params() { return params_; }

  std::vector<double> Forward(std::span<const double> x) const;

  /// Backpropagates dL/dy. Adds parameter gradients into `dparams` (if not
  /// null) and writes dL/dx into `dx` (if not null).
  void Backward(std::span<const double> x, std::span<const double> dy, std::vector<double>* dx,
                std::vector<double>* dparams) const;

  /// Named views of the parameter vector, in storage order.
  std::vector<std::pair<std::string, std::vector<std::size_t>>> TensorLayout() const;

  friend bool operator==(const MappingModel&, const MappingModel&) = default;

 private:
  void ForwardLstm(std::span<const double> u, bool reverse, std::size_t offset, std::vector<double>& hs,
                   std::vector<double>& cs, std::vector<double>& gates) const;
  void BackwardLstm(std::span<const double> u, bool reverse, std::size_t offset, const std::vector<double>& hs,
                    const std::vector<double>& cs, const std::vector<double>& gates, const std::vector<double>& dh_out,
                    std::vector<double>& du, std::vector<double>* dparams) const;

  MappingConfig config_;
  std::vector<double> params_;
};

struct TrainOptions {
  double lr = 1e-3;
  std::size_t epochs = 100;
  std::size_t batch = 64;
  double val_fraction = 0.1;
  std::size_t patience = 10;  // epochs without validation improvement
  std::uint64_t seed = 0;
};

struct TrainReport {
  std::vector<double> train_loss;  // per epoch
  std::vector<double> val_loss;
  std::size_t best_epoch = 0;
  double best_val = 0.0;
};

/// Adam on mean element-wise L1 between m(x) and π. The last `val_fraction`
/// of the samples is held out; with fewer than two samples the training set
/// doubles as validation. Returns the best-on-validation parameters.
MappingModel TrainMapping(std::span<const SyntheticRankSample> samples, const MappingConfig& config,
                          const TrainOptions& opts, TrainReport* report = nullptr);

std::vector<double> MapRanks(const MappingModel& m, std::span<const double> w);

struct MappingEval {
  double mean_l1 = 0.0;       // element-wise, rank units
  double mean_spearman = 0.0;
};

MappingEval EvaluateMapping(const MappingModel& m, std::span<const SyntheticRankSample> samples);

double SpearmanRho(std::span<const double> a, std::span<const double> b);
double KendallTau(std::span<const double> a, std::span<const double> b);

/// r(z) = a·z + b.
class RankingModel {
 public:
  RankingModel() = default;
  explicit RankingModel(std::size_t dim) : weight_(dim, 0.0) {}
  RankingModel(std::vector<double> weight, double bias);

  std::size_t dim() const { return weight_.size(); }
  const std::vector<double>& weight() const { return weight_; }
  std::vector<double>& weight() { return weight_; }
  double bias() const { return bias_; }
  double& bias() { return bias_; }

  double Score(const FeatureVector& z) const;
  std::vector<double> Scores(std::span<const FeatureVector> feats) const;

  friend bool operator==(const RankingModel&, const RankingModel&) = default;

 private:
  std::vector<double> weight_;
  double bias_ = 0.0;
};

/// softmax of the K scores.
std::vector<double> Reliability(const RankingModel& r, std::span<const FeatureVector> feats);

/// Mean element-wise |m(softmax(r(z))) − π| for one sample and its gradient
/// with respect to r's parameters (weight entries, then bias).
double RankingLossAndGrad(const RankingModel& r, const MappingModel& m, std::span<const FeatureVector> feats,
                          std::span<const double> label, std::vector<double>* grad);

struct RankingData {
  std::vector<std::vector<FeatureVector>> feats;  // [sample][branch]
  std::vector<std::vector<double>> labels;        // rank labels or raw losses
};

RankingModel TrainRanking(const RankingData& data, const MappingModel& m, const TrainOptions& opts,
                          TrainReport* report = nullptr);

/// Regresses raw per-branch losses with an L1 objective (no mapping module).
RankingModel TrainLossRegressor(const RankingData& data, const TrainOptions& opts, TrainReport* report = nullptr);

/// How the head turns scores into aggregation weights.
enum class RankVariant {
  kFull,         // softmax of r scores
  kInverseLoss,  // r predicts loss; weights ∝ 1 / r
  kInverseRank,  // r predicts loss; weights ∝ K + 1 − rank(1 / r)
};

const char* RankVariantName(RankVariant v);
RankVariant ParseRankVariant(const std::string& name);

struct RankHead {
  RankVariant variant = RankVariant::kFull;
  MappingModel mapping;  // unused by the inverse variants
  RankingModel ranking;

  /// Reliability scores, larger is more reliable.
  std::vector<double> ReliabilityScores(std::span<const FeatureVector> feats) const;
  /// Aggregation weights on the simplex.
  std::vector<double> Weights(std::span<const FeatureVector> feats) const;
};

/// Uniform weights 1/K.
std::vector<double> UniformWeights(std::size_t k);

Container RankHeadToContainer(const RankHead& h);
RankHead RankHeadFromContainer(const Container& c);
void SaveRankHeadFile(const std::filesystem::path& path, const RankHead& h);
RankHead LoadRankHeadFile(const std::filesystem::path& path);

}  // namespace bft

#endif  // BFT_RANK_HPP_

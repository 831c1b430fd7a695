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

// Variance of a weighted ensemble of correlated branch predictions, the
// homogeneous and heterogeneous upper bounds, the effective branch count,
// and Monte-Carlo estimators that check them.

#ifndef BFT_THEORY_HPP_
#define BFT_THEORY_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include <json.hpp>

#include "bft/model.hpp"
#include "bft/numerics.hpp"
#include "bft/transforms.hpp"

namespace bft {

struct BranchStats {
  std::vector<double> sigma2;  // per-branch variance, ≥ 0
  Matrix corr;                 // K × K, unit diagonal, PSD
  std::vector<double> w;       // on the simplex
  double v0 = 1.0;             // single-shot variance
  double kappa = 1.0;          // max σ² ≤ κ·V0

  std::size_t k() const { return sigma2.size(); }
  /// max over i ≠ j of |ρ_ij|; 0 when K = 1.
  double RhoMax() const;
  /// Σ_ij = ρ_ij σ_i σ_j.
  Matrix CovarianceMatrix() const;
  /// Throws kContract naming the first violated invariant.
  void Validate() const;
};

/// Σ_k w_k² σ_k² + Σ_{i≠j} w_i w_j ρ_ij σ_i σ_j.
double VarDecompose(const BranchStats& s);

/// σ²·(ρ_max + (1 − ρ_max)·Σ w_k²).
double HomoBound(double sigma2, double rho_max, std::span<const double> w);

/// 1 / Σ w_k².
double KEff(std::span<const double> w);

struct HeteroResult {
  double bound = 0.0;              // κ·V0·(ρ_max + (1 − ρ_max)·Σ w²)
  bool condition_applicable = false;  // ρ_max < 1/κ
  double threshold = 0.0;          // κ(1 − ρ_max)/(1 − κρ_max) when applicable
  bool condition_met = false;      // K_eff > threshold
  bool reduced = false;            // VarDecompose < V0
};

HeteroResult HeteroCheck(const BranchStats& s);

struct RandomStatsOptions {
  bool homogeneous = false;
  double min_sigma2 = 0.1;
  double max_sigma2 = 10.0;
  double max_kappa_slack = 0.5;  // κ = (σ²_max / V0)·(1 + U(0, slack))
};

/// Valid stats with a random-factor correlation matrix (A·Aᵀ normalized to a
/// unit diagonal), random simplex weights and V0 ≤ σ²_max.
BranchStats RandomBranchStats(std::size_t k, std::mt19937_64& rng, const RandomStatsOptions& opts = {});

/// Sample variance of w·f over n draws of f ~ N(0, Σ).
double MonteCarloVariance(const BranchStats& s, std::size_t n, std::uint64_t seed);

/// Prediction of branch `branch` under the independent randomness of draw
/// `draw`.
using BranchFn = std::function<double(std::size_t branch, std::uint64_t draw)>;

struct EmpiricalBranchStats {
  BranchStats stats;           // κ = max(1, σ²_max / V0)
  double ensemble_var = 0.0;   // sample variance of Σ w_k f_k over joint draws
  bool degenerate = false;     // V0 == 0
};

/// Joint draws d = 0..n−1 evaluate every branch under draw d; σ², ρ come from
/// those. V0 is the variance of one uniformly chosen branch under a fresh
/// draw. Branches with zero variance get zero correlation to the others.
/// The weights are taken as given (conditioned on the realized vector).
EmpiricalBranchStats McBranchVariance(const BranchFn& branch, std::size_t k, std::span<const double> w,
                                      std::size_t n, std::uint64_t seed);

enum class BranchMode { kAugment, kDropout };

struct PipelineProbe {
  const ModelBundle* model = nullptr;
  BranchMode mode = BranchMode::kAugment;
  std::vector<TransformSpec> bank;  // kAugment
  std::size_t masks = 10;           // kDropout
  std::size_t output = 0;           // class whose probability is the scalar
};

/// Scalar branch predictions of the deployed pipeline on one (aligned,
/// untruncated) trial. Noise transforms draw a fresh seed per draw; dropout
/// branches use the blocks of a per-draw random permutation.
BranchFn PipelineBranchFn(const PipelineProbe& probe, const Trial& full);

struct TheoryCheckOptions {
  std::size_t sweeps = 10000;
  std::size_t mc_cases = 20;
  std::size_t mc_draws = 1000000;
  std::size_t max_k = 12;
  std::uint64_t seed = 7;
};

/// Runs every sweep and Monte-Carlo check and returns a JSON report with a
/// top-level boolean "pass".
nlohmann::json TheoryCheck(const TheoryCheckOptions& opts);

}  // namespace bft

#endif  // BFT_THEORY_HPP_

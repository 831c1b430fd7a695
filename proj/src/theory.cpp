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

#include "bft/theory.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "bft/error.hpp"

namespace bft {

double BranchStats::RhoMax() const {
  double m = 0.0;
  for (std::size_t i = 0; i < k(); ++i)
    for (std::size_t j = 0; j < k(); ++j)
      if (i != j) m = std::max(m, std::abs(corr(i, j)));
  return m;
}

Matrix BranchStats::CovarianceMatrix() const {
  Matrix c(k(), k());
  for (std::size_t i = 0; i < k(); ++i)
    for (std::size_t j = 0; j < k(); ++j) c(i, j) = corr(i, j) * std::sqrt(sigma2[i] * sigma2[j]);
  return c;
}

void BranchStats::Validate() const {
  const std::size_t n = k();
  Require(n >= 1, ErrorKind::kContract, "branch stats need K >= 1");
  Require(corr.rows() == n && corr.cols() == n, ErrorKind::kContract, "correlation matrix must be K x K");
  Require(w.size() == n, ErrorKind::kContract, "weight vector must have K entries");
  for (double s : sigma2) Require(std::isfinite(s) && s >= 0.0, ErrorKind::kContract, "branch variance must be >= 0");
  double wsum = 0.0;
  for (double x : w) {
    Require(std::isfinite(x) && x >= 0.0, ErrorKind::kContract, "weights must be non-negative");
    wsum += x;
  }
  Require(std::abs(wsum - 1.0) <= 1e-9, ErrorKind::kContract, "weights must sum to one");
  for (std::size_t i = 0; i < n; ++i) {
    Require(std::abs(corr(i, i) - 1.0) <= 1e-12, ErrorKind::kContract, "correlation diagonal must be one");
    for (std::size_t j = 0; j < n; ++j) {
      Require(std::abs(corr(i, j) - corr(j, i)) <= 1e-12, ErrorKind::kContract, "correlation must be symmetric");
      Require(std::abs(corr(i, j)) <= 1.0 + 1e-12, ErrorKind::kContract, "correlation entries must lie in [-1, 1]");
    }
  }
  const SymmetricEigen eig = JacobiEigen(SymMatrix(corr));
  Require(eig.values.front() >= -1e-10, ErrorKind::kContract, "correlation matrix is not positive semidefinite");
  Require(v0 > 0.0 && std::isfinite(v0), ErrorKind::kContract, "V0 must be positive");
  Require(kappa >= 1.0, ErrorKind::kContract, "kappa must be >= 1");
  const double smax = *std::max_element(sigma2.begin(), sigma2.end());
  Require(smax <= kappa * v0 * (1.0 + 1e-12), ErrorKind::kContract, "max branch variance exceeds kappa * V0");
}

double VarDecompose(const BranchStats& s) {
  const std::size_t n = s.k();
  Require(s.corr.rows() == n && s.corr.cols() == n && s.w.size() == n, ErrorKind::kContract,
          "invalid branch stats dimensions");
  double diag = 0.0, off = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    diag += s.w[i] * s.w[i] * s.sigma2[i];
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) off += s.w[i] * s.w[j] * s.corr(i, j) * std::sqrt(s.sigma2[i] * s.sigma2[j]);
  }
  return diag + off;
}

double HomoBound(double sigma2, double rho_max, std::span<const double> w) {
  Require(sigma2 > 0.0, ErrorKind::kContract, "sigma2 must be positive");
  Require(rho_max >= 0.0 && rho_max <= 1.0, ErrorKind::kContract, "rho_max must lie in [0, 1]");
  return sigma2 * (rho_max + (1.0 - rho_max) / KEff(w));
}

double KEff(std::span<const double> w) {
  Require(!w.empty(), ErrorKind::kContract, "k_eff of an empty weight vector");
  double s = 0.0;
  for (double x : w) s += x * x;
  Require(s > 0.0, ErrorKind::kContract, "k_eff of a zero weight vector");
  return 1.0 / s;
}

HeteroResult HeteroCheck(const BranchStats& s) {
  s.Validate();
  const double rho = s.RhoMax();
  const double keff = KEff(s.w);
  HeteroResult r;
  r.bound = s.kappa * s.v0 * (rho + (1.0 - rho) / keff);
  r.condition_applicable = rho < 1.0 / s.kappa;
  if (r.condition_applicable) {
    r.threshold = s.kappa * (1.0 - rho) / (1.0 - s.kappa * rho);
    r.condition_met = keff > r.threshold;
  }
  r.reduced = VarDecompose(s) < s.v0;
  return r;
}

namespace {

Matrix RandomCorrelation(std::size_t k, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> rank(1, k);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t r = rank(rng);
  Matrix a(k, r);
  for (double& v : a.values()) v = g(rng);
  // Blend towards independence so that small ρ_max also shows up.
  const double mix = u(rng);
  Matrix s = a * a.Transposed();
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) s(i, j) = mix * s(i, j) / static_cast<double>(r) + (i == j ? 1.0 - mix + 1e-9 : 0.0);
  Matrix c(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) c(i, j) = i == j ? 1.0 : s(i, j) / std::sqrt(s(i, i) * s(j, j));
  return c;
}

}  // namespace

BranchStats RandomBranchStats(std::size_t k, std::mt19937_64& rng, const RandomStatsOptions& opts) {
  Require(k >= 1, ErrorKind::kContract, "branch stats need K >= 1");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::exponential_distribution<double> ex(1.0);
  const double lo = std::log(opts.min_sigma2), hi = std::log(opts.max_sigma2);
  BranchStats s;
  s.corr = RandomCorrelation(k, rng);
  s.sigma2.resize(k);
  const double common = std::exp(lo + (hi - lo) * u(rng));
  for (double& v : s.sigma2) v = opts.homogeneous ? common : std::exp(lo + (hi - lo) * u(rng));
  // Dirichlet(α) weights with α spanning concentrated to near-uniform.
  const double alpha = std::exp(std::log(0.05) + (std::log(20.0) - std::log(0.05)) * u(rng));
  std::gamma_distribution<double> gam(alpha, 1.0);
  double sum = 0.0;
  s.w.resize(k);
  for (double& v : s.w) {
    v = gam(rng) + 1e-300;
    sum += v;
  }
  for (double& v : s.w) v /= sum;
  const double smax = *std::max_element(s.sigma2.begin(), s.sigma2.end());
  const double smin = *std::min_element(s.sigma2.begin(), s.sigma2.end());
  s.v0 = opts.homogeneous ? common : smin + (smax - smin) * u(rng);
  s.kappa = std::max(1.0, smax / s.v0) * (1.0 + opts.max_kappa_slack * u(rng));
  return s;
}

double MonteCarloVariance(const BranchStats& s, std::size_t n, std::uint64_t seed) {
  Require(n >= 2, ErrorKind::kContract, "Monte-Carlo variance needs n >= 2");
  const std::size_t k = s.k();
  const Matrix root = SqrtPsd(SymMatrix(s.CovarianceMatrix())).matrix();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> z(k);
  double mean = 0.0, m2 = 0.0;
  for (std::size_t d = 0; d < n; ++d) {
    for (double& v : z) v = g(rng);
    double y = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      double f = 0.0;
      for (std::size_t j = 0; j < k; ++j) f += root(i, j) * z[j];
      y += s.w[i] * f;
    }
    const double delta = y - mean;
    mean += delta / static_cast<double>(d + 1);
    m2 += delta * (y - mean);
  }
  return m2 / static_cast<double>(n - 1);
}

EmpiricalBranchStats McBranchVariance(const BranchFn& branch, std::size_t k, std::span<const double> w,
                                      std::size_t n, std::uint64_t seed) {
  Require(k >= 1 && w.size() == k, ErrorKind::kContract, "weights must have K entries");
  Require(n >= 2, ErrorKind::kContract, "branch variance needs n >= 2 draws");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, k - 1);
  // Draw ids: joint draws use [0, n), single shots use [n, 2n).
  std::vector<double> f(n * k);
  std::vector<double> ens(n, 0.0);
  for (std::size_t d = 0; d < n; ++d)
    for (std::size_t b = 0; b < k; ++b) {
      const double v = branch(b, seed * 0x9e3779b97f4a7c15ULL + d);
      Require(std::isfinite(v), ErrorKind::kNumerical, "branch prediction is not finite");
      f[d * k + b] = v;
      ens[d] += w[b] * v;
    }
  std::vector<double> single(n);
  for (std::size_t d = 0; d < n; ++d) single[d] = branch(pick(rng), seed * 0x9e3779b97f4a7c15ULL + n + d);

  // Deviations from the first draw keep a constant series at exactly zero.
  const auto variance = [](std::span<const double> x) {
    const double x0 = x.front();
    double m = 0.0;
    for (double v : x) m += v - x0;
    m /= static_cast<double>(x.size());
    double s = 0.0;
    for (double v : x) s += (v - x0 - m) * (v - x0 - m);
    return s / static_cast<double>(x.size() - 1);
  };
  for (std::size_t d = n; d-- > 0;)
    for (std::size_t b = 0; b < k; ++b) f[d * k + b] -= f[b];
  std::vector<double> mean(k, 0.0);
  for (std::size_t d = 0; d < n; ++d)
    for (std::size_t b = 0; b < k; ++b) mean[b] += f[d * k + b] / static_cast<double>(n);
  Matrix cov(k, k);
  for (std::size_t d = 0; d < n; ++d)
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) cov(i, j) += (f[d * k + i] - mean[i]) * (f[d * k + j] - mean[j]);
  for (double& v : cov.values()) v /= static_cast<double>(n - 1);

  EmpiricalBranchStats out;
  BranchStats& s = out.stats;
  s.w.assign(w.begin(), w.end());
  s.sigma2.resize(k);
  s.corr = Matrix(k, k);
  for (std::size_t i = 0; i < k; ++i) s.sigma2[i] = cov(i, i);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) {
        s.corr(i, j) = 1.0;
      } else if (cov(i, i) > 0.0 && cov(j, j) > 0.0) {
        s.corr(i, j) = std::clamp(cov(i, j) / std::sqrt(cov(i, i) * cov(j, j)), -1.0, 1.0);
      }
    }
  s.v0 = variance(single);
  out.ensemble_var = variance(ens);
  out.degenerate = !(s.v0 > 0.0);
  const double smax = *std::max_element(s.sigma2.begin(), s.sigma2.end());
  s.kappa = out.degenerate ? 1.0 : std::max(1.0, smax / s.v0);
  return out;
}

BranchFn PipelineBranchFn(const PipelineProbe& probe, const Trial& full) {
  Require(probe.model != nullptr, ErrorKind::kContract, "pipeline probe has no model");
  const ModelBundle& m = *probe.model;
  const auto scalar = [&m, out = probe.output](const Prediction& p) {
    if (m.head_kind() == HeadKind::kRegressor) return p.scalar();
    return Softmax(p.values).at(out);
  };
  if (probe.mode == BranchMode::kAugment) {
    Require(!probe.bank.empty(), ErrorKind::kContract, "pipeline probe has an empty bank");
    return [&m, scalar, bank = probe.bank, full](std::size_t b, std::uint64_t draw) {
      TransformSpec spec = bank.at(b);
      if (spec.kind == TransformKind::kNoise) spec.seed = spec.seed ^ (draw * 0xbf58476d1ce4e5b9ULL + 1);
      return scalar(Forward(m, ApplyTransform(full, spec, m.input_samples())));
    };
  }
  Require(probe.masks >= 2, ErrorKind::kContract, "dropout probe needs at least two masks");
  const FeatureVector feat = Features(m, full.Slice(0, m.input_samples()));
  return [&m, scalar, feat, k = probe.masks](std::size_t b, std::uint64_t draw) {
    std::mt19937_64 rng(draw);
    const std::vector<DropoutMask> masks = BuildPermutedMasks(k, feat.dim(), rng);
    return scalar(Head(m, ApplyMask(feat, masks.at(b))));
  };
}

nlohmann::json TheoryCheck(const TheoryCheckOptions& opts) {
  Require(opts.max_k >= 2, ErrorKind::kConfig, "max_k must be >= 2");
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(opts.seed);
  std::uniform_int_distribution<std::size_t> kdist(2, opts.max_k);
  nlohmann::json report;

  // Exact decomposition against Monte-Carlo and the quadratic form.
  double worst_mc = 0.0, worst_quad = 0.0;
  for (std::size_t c = 0; c < opts.mc_cases; ++c) {
    const BranchStats s = RandomBranchStats(kdist(rng), rng);
    const double v = VarDecompose(s);
    const double mc = MonteCarloVariance(s, opts.mc_draws, opts.seed + 1000 + c);
    worst_mc = std::max(worst_mc, std::abs(mc - v) / v);
    const Matrix cov = s.CovarianceMatrix();
    double quad = 0.0;
    for (std::size_t i = 0; i < s.k(); ++i)
      for (std::size_t j = 0; j < s.k(); ++j) quad += s.w[i] * cov(i, j) * s.w[j];
    worst_quad = std::max(worst_quad, std::abs(quad - v));
  }
  const double mc_tol = 0.02 * std::sqrt(1e6 / static_cast<double>(std::max<std::size_t>(opts.mc_draws, 1)));
  report["lemma"] = {{"cases", opts.mc_cases},           {"draws", opts.mc_draws},
                     {"max_rel_error_mc", worst_mc},      {"tolerance_mc", mc_tol},
                     {"max_abs_error_quadratic", worst_quad}, {"pass", worst_mc <= mc_tol && worst_quad <= 1e-12}};

  // Homogeneous bound.
  std::size_t homo_viol = 0;
  for (std::size_t c = 0; c < opts.sweeps; ++c) {
    RandomStatsOptions ho;
    ho.homogeneous = true;
    const BranchStats s = RandomBranchStats(kdist(rng), rng, ho);
    const double v = VarDecompose(s);
    if (HomoBound(s.sigma2[0], s.RhoMax(), s.w) < v - 1e-12 * std::max(1.0, std::abs(v))) ++homo_viol;
  }
  report["homogeneous"] = {{"sweeps", opts.sweeps}, {"violations", homo_viol}, {"pass", homo_viol == 0}};

  // Heterogeneous bound and the sufficient condition.
  std::size_t hetero_viol = 0, counter = 0, met = 0, applicable = 0, keff_viol = 0;
  for (std::size_t c = 0; c < opts.sweeps; ++c) {
    const BranchStats s = RandomBranchStats(kdist(rng), rng);
    const HeteroResult r = HeteroCheck(s);
    const double v = VarDecompose(s);
    if (r.bound < v - 1e-12 * std::max(1.0, std::abs(v))) ++hetero_viol;
    if (r.condition_applicable) ++applicable;
    if (r.condition_met) {
      ++met;
      if (!r.reduced) ++counter;
    }
    const double ke = KEff(s.w);
    if (ke < 1.0 - 1e-12 || ke > static_cast<double>(s.k()) * (1.0 + 1e-12)) ++keff_viol;
  }
  report["heterogeneous"] = {{"sweeps", opts.sweeps},
                             {"bound_violations", hetero_viol},
                             {"condition_applicable", applicable},
                             {"condition_met", met},
                             {"implication_counterexamples", counter},
                             {"k_eff_range_violations", keff_viol},
                             {"pass", hetero_viol == 0 && counter == 0 && keff_viol == 0}};
  report["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report["pass"] = report["lemma"]["pass"].get<bool>() && report["homogeneous"]["pass"].get<bool>() &&
                   report["heterogeneous"]["pass"].get<bool>();
  return report;
}

}  // namespace bft

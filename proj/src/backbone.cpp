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

#include "bft/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <string>

#include "bft/alignment.hpp"
#include "bft/error.hpp"

namespace bft {
namespace {

double Sinc(double x) { return x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x); }

// Composite-normalized CSP: the eigenvectors of P·Ca·P with P = (Ca + Cb)^(-1/2),
// mapped back through P. Returns the filters for the largest and smallest
// eigenvalues, alternating, `count` in total.
std::vector<std::vector<double>> CspFilters(const Matrix& ca, const Matrix& cb, std::size_t count) {
  const std::size_t c = ca.rows();
  SymMatrix composite(ca + cb);
  const SymMatrix p = InvSqrtPsd(composite, 1e-6 * composite.Trace() / static_cast<double>(c));
  const SymmetricEigen eig = JacobiEigen(SymMatrix(p.matrix() * ca * p.matrix()));
  std::vector<std::vector<double>> out;
  for (std::size_t n = 0; n < count; ++n) {
    const std::size_t col = n % 2 == 0 ? c - 1 - n / 2 : n / 2;
    std::vector<double> w(c, 0.0);
    for (std::size_t r = 0; r < c; ++r)
      for (std::size_t q = 0; q < c; ++q) w[r] += p(r, q) * eig.vectors(q, col);
    double norm = 0.0;
    for (double v : w) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : w) v /= norm;
    out.push_back(std::move(w));
  }
  return out;
}

Matrix BandCovariance(const Activation& filtered, std::size_t band) {
  const std::size_t c = filtered.rows, t = filtered.cols;
  Matrix cov(c, c);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = i; j < c; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < t; ++k) s += filtered.at(band, i, k) * filtered.at(band, j, k);
      cov(i, j) = cov(j, i) = s;
    }
  double tr = 0.0;
  for (std::size_t i = 0; i < c; ++i) tr += cov(i, i);
  return (1.0 / tr) * cov;
}

// Softmax regression on standardized features, Adam on the full batch.
void FitLogistic(const std::vector<std::vector<double>>& z, const std::vector<double>& labels, std::size_t classes,
                 double l2, std::size_t iterations, std::vector<double>& w, std::vector<double>& b) {
  const std::size_t n = z.size(), d = z.front().size();
  w.assign(classes * d, 0.0);
  b.assign(classes, 0.0);
  std::vector<double> mw(w.size(), 0.0), vw(w.size(), 0.0), mb(classes, 0.0), vb(classes, 0.0);
  const double lr = 0.05, b1 = 0.9, b2 = 0.999;
  std::vector<double> gw(w.size()), gb(classes), logits(classes);
  for (std::size_t it = 1; it <= iterations; ++it) {
    std::fill(gw.begin(), gw.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t k = 0; k < classes; ++k) {
        double v = b[k];
        for (std::size_t i = 0; i < d; ++i) v += w[k * d + i] * z[s][i];
        logits[k] = v;
      }
      std::vector<double> p = Softmax(logits);
      p[static_cast<std::size_t>(labels[s])] -= 1.0;
      for (std::size_t k = 0; k < classes; ++k) {
        gb[k] += p[k];
        for (std::size_t i = 0; i < d; ++i) gw[k * d + i] += p[k] * z[s][i];
      }
    }
    const double inv = 1.0 / static_cast<double>(n);
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(it)), c2 = 1.0 - std::pow(b2, static_cast<double>(it));
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double g = gw[j] * inv + l2 * w[j];
      mw[j] = b1 * mw[j] + (1 - b1) * g;
      vw[j] = b2 * vw[j] + (1 - b2) * g * g;
      w[j] -= lr * (mw[j] / c1) / (std::sqrt(vw[j] / c2) + 1e-8);
    }
    for (std::size_t k = 0; k < classes; ++k) {
      const double g = gb[k] * inv;
      mb[k] = b1 * mb[k] + (1 - b1) * g;
      vb[k] = b2 * vb[k] + (1 - b2) * g * g;
      b[k] -= lr * (mb[k] / c1) / (std::sqrt(vb[k] / c2) + 1e-8);
    }
  }
}

// Ridge regression on standardized features via Cholesky.
void FitRidge(const std::vector<std::vector<double>>& z, const std::vector<double>& y, double l2,
              std::vector<double>& w, double& b) {
  const std::size_t n = z.size(), d = z.front().size();
  double ybar = 0.0;
  for (double v : y) ybar += v;
  ybar /= static_cast<double>(n);
  Matrix a(d, d);
  std::vector<double> rhs(d, 0.0);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t i = 0; i < d; ++i) {
      rhs[i] += z[s][i] * (y[s] - ybar);
      for (std::size_t j = 0; j <= i; ++j) a(i, j) += z[s][i] * z[s][j];
    }
  for (std::size_t i = 0; i < d; ++i) a(i, i) += l2 * static_cast<double>(n);
  // In-place lower Cholesky.
  for (std::size_t j = 0; j < d; ++j) {
    double s = a(j, j);
    for (std::size_t k = 0; k < j; ++k) s -= a(j, k) * a(j, k);
    Require(s > 0.0, ErrorKind::kNumerical, "ridge system is not positive definite");
    a(j, j) = std::sqrt(s);
    for (std::size_t i = j + 1; i < d; ++i) {
      double t = a(i, j);
      for (std::size_t k = 0; k < j; ++k) t -= a(i, k) * a(j, k);
      a(i, j) = t / a(j, j);
    }
  }
  w = rhs;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t k = 0; k < i; ++k) w[i] -= a(i, k) * w[k];
    w[i] /= a(i, i);
  }
  for (std::size_t i = d; i-- > 0;) {
    for (std::size_t k = i + 1; k < d; ++k) w[i] -= a(k, i) * w[k];
    w[i] /= a(i, i);
  }
  b = ybar;
}

Layer BatchNormLayer(std::size_t maps) {
  Layer l;
  l.spec.kind = LayerKind::kBatchNorm;
  l.spec.in_maps = l.spec.out_maps = maps;
  l.gamma.assign(maps, 1.0);
  l.beta.assign(maps, 0.0);
  l.running_mean.assign(maps, 0.0);
  l.running_var.assign(maps, 1.0);
  return l;
}

Layer SimpleLayer(LayerKind kind, std::size_t pool = 0) {
  Layer l;
  l.spec.kind = kind;
  l.spec.pool = pool;
  return l;
}

}  // namespace

std::vector<double> BandPassFir(double lo_hz, double hi_hz, double rate_hz, std::size_t taps) {
  Require(taps % 2 == 1, ErrorKind::kContract, "band-pass FIR needs an odd tap count");
  Require(0.0 <= lo_hz && lo_hz < hi_hz && hi_hz < rate_hz / 2, ErrorKind::kContract, "band edges out of range");
  const double f1 = lo_hz / rate_hz, f2 = hi_hz / rate_hz;
  const double mid = static_cast<double>(taps - 1) / 2.0;
  std::vector<double> h(taps);
  for (std::size_t n = 0; n < taps; ++n) {
    const double x = static_cast<double>(n) - mid;
    const double win = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(taps - 1));
    h[n] = (2.0 * f2 * Sinc(2.0 * f2 * x) - 2.0 * f1 * Sinc(2.0 * f1 * x)) * win;
  }
  const double fc = (f1 + f2) / 2.0;
  std::complex<double> g = 0.0;
  for (std::size_t n = 0; n < taps; ++n) g += h[n] * std::polar(1.0, -2.0 * std::numbers::pi * fc * static_cast<double>(n));
  const double gain = std::abs(g);
  for (double& v : h) v /= gain;
  return h;
}

TrainingSet PrepareTrainingSet(std::span<const Stream> train, const BackboneOptions& opts) {
  Require(!train.empty(), ErrorKind::kData, "no training streams");
  TrainingSet out;
  const std::vector<TransformSpec> bank = opts.augment_copies > 0 ? BuildBank(opts.bank) : std::vector<TransformSpec>{};
  std::mt19937_64 rng(opts.seed ^ 0x5eedba5eULL);
  for (const Stream& s : train) {
    Require(!s.trials.empty(), ErrorKind::kData, "empty training stream");
    std::vector<Trial> full = opts.ea ? EaAlignSet(s.trials) : s.trials;
    for (std::size_t i = 0; i < full.size(); ++i) {
      const std::size_t len = TruncatedLength(full[i]);
      out.trials.push_back(ApplyTransform(full[i], TransformSpec::Identity(), len));
      out.labels.push_back(s.labels[i]);
      for (std::size_t c = 0; c < opts.augment_copies; ++c) {
        TransformSpec spec = bank[std::uniform_int_distribution<std::size_t>(0, bank.size() - 1)(rng)];
        if (spec.kind == TransformKind::kNoise) spec.seed = rng();
        out.trials.push_back(ApplyTransform(full[i], spec, len));
        out.labels.push_back(s.labels[i]);
      }
    }
  }
  return out;
}

ModelBundle FitBackbone(std::span<const Stream> train, const BackboneOptions& opts) {
  Require(!train.empty(), ErrorKind::kData, "no training streams");
  Require(!opts.bands.empty() && opts.depth >= 1, ErrorKind::kConfig, "backbone needs bands and depth ≥ 1");
  const Task task = train.front().task;
  const std::size_t classes = train.front().classes;
  for (const Stream& s : train)
    Require(s.task == task && s.classes == classes, ErrorKind::kData, "training streams disagree on the task");
  TrainingSet set = PrepareTrainingSet(train, opts);
  const std::size_t channels = set.trials.front().channels();
  const std::size_t samples = set.trials.front().samples();
  const double rate = set.trials.front().rate_hz();
  const std::size_t bands = opts.bands.size(), maps = bands * opts.depth;

  Layer temporal;
  temporal.spec.kind = LayerKind::kConv2dTemporal;
  temporal.spec.in_maps = 1;
  temporal.spec.out_maps = bands;
  temporal.spec.kernel = opts.temporal_kernel;
  for (const auto& [lo, hi] : opts.bands) {
    std::vector<double> h = BandPassFir(lo, hi, rate, opts.temporal_kernel);
    temporal.weight.insert(temporal.weight.end(), h.begin(), h.end());
  }

  // Two-class split for CSP: class 0 against the rest, or a median split of
  // the regression target.
  std::vector<bool> positive(set.labels.size());
  if (task == Task::kClassification) {
    for (std::size_t i = 0; i < set.labels.size(); ++i) positive[i] = set.labels[i] == 0.0;
  } else {
    std::vector<double> sorted = set.labels;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
    const double median = sorted[sorted.size() / 2];
    for (std::size_t i = 0; i < set.labels.size(); ++i) positive[i] = set.labels[i] >= median;
  }
  std::vector<Matrix> ca(bands, Matrix(channels, channels)), cb(bands, Matrix(channels, channels));
  std::vector<std::size_t> na(1, 0), nb(1, 0);
  for (std::size_t i = 0; i < set.trials.size(); ++i) {
    if (set.trials[i].samples() != samples) Fail(ErrorKind::kData, "training trials differ in length");
    const Activation f = ForwardLayer(temporal, TrialToActivation(set.trials[i]));
    for (std::size_t b = 0; b < bands; ++b) {
      Matrix& acc = positive[i] ? ca[b] : cb[b];
      acc = acc + BandCovariance(f, b);
    }
    (positive[i] ? na[0] : nb[0])++;
  }
  Require(na[0] > 0 && nb[0] > 0, ErrorKind::kData, "training data holds a single class");

  Layer spatial;
  spatial.spec.kind = LayerKind::kDepthwiseConv;
  spatial.spec.in_maps = bands;
  spatial.spec.out_maps = maps;
  spatial.spec.kernel = channels;
  for (std::size_t b = 0; b < bands; ++b) {
    const auto filters = CspFilters((1.0 / static_cast<double>(na[0])) * ca[b],
                                    (1.0 / static_cast<double>(nb[0])) * cb[b], opts.depth);
    for (const auto& w : filters) spatial.weight.insert(spatial.weight.end(), w.begin(), w.end());
  }

  Layer separable;
  separable.spec.kind = LayerKind::kSeparableConv;
  separable.spec.in_maps = separable.spec.out_maps = maps;
  separable.spec.kernel = opts.sep_kernel;
  separable.weight.assign(maps * opts.sep_kernel, 1.0 / static_cast<double>(opts.sep_kernel));
  separable.pointwise.assign(maps * maps, 0.0);
  for (std::size_t m = 0; m < maps; ++m) separable.pointwise[m * maps + m] = 1.0;

  std::vector<Layer> layers = {temporal,
                               spatial,
                               BatchNormLayer(maps),
                               SimpleLayer(LayerKind::kElu),
                               SimpleLayer(LayerKind::kAvgPool, opts.pool1),
                               separable,
                               BatchNormLayer(maps),
                               SimpleLayer(LayerKind::kElu),
                               SimpleLayer(LayerKind::kAvgPool, opts.pool2),
                               SimpleLayer(LayerKind::kFlatten)};
  const std::size_t d = maps * (samples / opts.pool1 / opts.pool2);
  const std::size_t outputs = task == Task::kClassification ? classes : 1;
  Layer dense;
  dense.spec.kind = LayerKind::kDense;
  dense.spec.in_features = d;
  dense.spec.out_features = outputs;
  dense.spec.bias = true;
  dense.weight.assign(outputs * d, 0.0);
  dense.bias.assign(outputs, 0.0);
  layers.push_back(dense);

  nlohmann::json meta = {{"ea", opts.ea}, {"fitter", "reference-backbone"}, {"augment_copies", opts.augment_copies}};
  const HeadKind head = task == Task::kClassification ? HeadKind::kClassifier : HeadKind::kRegressor;
  ModelBundle model(layers, head, channels, samples, rate, meta);
  // Batch-norm statistics of the training data (momentum 1 replaces them).
  model = BnAdapt(model, set.trials, 1.0);

  const std::vector<FeatureVector> feats = FeaturesBatch(model, set.trials);
  const std::size_t n = feats.size();
  std::vector<double> mu(d, 0.0), sd(d, 0.0);
  for (const auto& f : feats)
    for (std::size_t i = 0; i < d; ++i) mu[i] += f[i];
  for (double& v : mu) v /= static_cast<double>(n);
  for (const auto& f : feats)
    for (std::size_t i = 0; i < d; ++i) sd[i] += (f[i] - mu[i]) * (f[i] - mu[i]);
  for (double& v : sd) v = std::max(std::sqrt(v / static_cast<double>(n)), 1e-8);
  std::vector<std::vector<double>> z(n, std::vector<double>(d));
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t i = 0; i < d; ++i) z[s][i] = (feats[s][i] - mu[i]) / sd[i];

  std::vector<double> w, b;
  if (task == Task::kClassification) {
    FitLogistic(z, set.labels, classes, opts.l2, opts.iterations, w, b);
  } else {
    double b0 = 0.0;
    FitRidge(z, set.labels, opts.l2, w, b0);
    b = {b0};
  }
  // Fold the standardization into the dense layer.
  std::vector<Layer> fitted = model.layers();
  Layer& out = fitted.back();
  for (std::size_t k = 0; k < outputs; ++k) {
    double shift = b[k];
    for (std::size_t i = 0; i < d; ++i) {
      out.weight[k * d + i] = w[k * d + i] / sd[i];
      shift -= w[k * d + i] * mu[i] / sd[i];
    }
    out.bias[k] = shift;
  }
  return ModelBundle(std::move(fitted), head, channels, samples, rate, meta);
}

}  // namespace bft

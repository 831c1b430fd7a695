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

#include "bft/model.hpp"

#include <cmath>
#include <string>

#include "bft/error.hpp"

namespace bft {

const char* LayerKindName(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv2dTemporal: return "conv2d_temporal";
    case LayerKind::kDepthwiseConv: return "depthwise_conv";
    case LayerKind::kSeparableConv: return "separable_conv";
    case LayerKind::kBatchNorm: return "batch_norm";
    case LayerKind::kElu: return "elu";
    case LayerKind::kAvgPool: return "avg_pool";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kDense: return "dense";
  }
  return "?";
}

LayerKind ParseLayerKind(const std::string& name) {
  for (LayerKind k : {LayerKind::kConv2dTemporal, LayerKind::kDepthwiseConv, LayerKind::kSeparableConv,
                      LayerKind::kBatchNorm, LayerKind::kElu, LayerKind::kAvgPool, LayerKind::kFlatten,
                      LayerKind::kDense}) {
    if (name == LayerKindName(k)) return k;
  }
  Fail(ErrorKind::kLoad, "unknown layer kind '" + name + "'");
}

namespace {

struct Shape {
  std::size_t maps, rows, cols;
  std::size_t size() const { return maps * rows * cols; }
};

[[noreturn]] void LayerFail(std::size_t index, const std::string& what) {
  Fail(ErrorKind::kLoad, "layer " + std::to_string(index) + ": " + what);
}

void ExpectSize(std::size_t index, const char* name, const std::vector<double>& v, std::size_t n) {
  if (v.size() != n) {
    LayerFail(index, std::string(name) + " has " + std::to_string(v.size()) + " values, expected " + std::to_string(n));
  }
  for (double x : v)
    if (!std::isfinite(x)) LayerFail(index, std::string(name) + " contains a non-finite value");
}

}  // namespace

ModelBundle::ModelBundle(std::vector<Layer> layers, HeadKind head_kind, std::size_t channels, std::size_t samples,
                         double rate_hz, nlohmann::json metadata)
    : layers_(std::move(layers)),
      head_kind_(head_kind),
      channels_(channels),
      samples_(samples),
      rate_hz_(rate_hz),
      metadata_(std::move(metadata)) {
  Require(channels_ > 0 && samples_ > 0 && rate_hz_ > 0, ErrorKind::kLoad, "model input shape must be positive");
  Shape s{1, channels_, samples_};
  bool flattened = false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    const LayerSpec& sp = l.spec;
    if (flattened && sp.kind != LayerKind::kDense && sp.kind != LayerKind::kElu)
      LayerFail(i, std::string(LayerKindName(sp.kind)) + " after flatten");
    if (!flattened && sp.kind == LayerKind::kDense) LayerFail(i, "dense before flatten");
    switch (sp.kind) {
      case LayerKind::kConv2dTemporal:
        if (sp.in_maps != s.maps) LayerFail(i, "expects " + std::to_string(sp.in_maps) + " input maps, got " + std::to_string(s.maps));
        if (sp.kernel == 0 || sp.out_maps == 0) LayerFail(i, "empty kernel");
        ExpectSize(i, "weight", l.weight, sp.out_maps * sp.in_maps * sp.kernel);
        ExpectSize(i, "bias", l.bias, sp.bias ? sp.out_maps : 0);
        s.maps = sp.out_maps;
        break;
      case LayerKind::kDepthwiseConv:
        if (sp.in_maps != s.maps) LayerFail(i, "expects " + std::to_string(sp.in_maps) + " input maps, got " + std::to_string(s.maps));
        if (sp.out_maps == 0 || sp.out_maps % sp.in_maps != 0) LayerFail(i, "out_maps must be a multiple of in_maps");
        if (sp.kernel == 0 || sp.kernel > s.rows) LayerFail(i, "spatial kernel exceeds input rows");
        ExpectSize(i, "weight", l.weight, sp.out_maps * sp.kernel);
        ExpectSize(i, "bias", l.bias, sp.bias ? sp.out_maps : 0);
        s.maps = sp.out_maps;
        s.rows = s.rows - sp.kernel + 1;
        break;
      case LayerKind::kSeparableConv:
        if (sp.in_maps != s.maps) LayerFail(i, "expects " + std::to_string(sp.in_maps) + " input maps, got " + std::to_string(s.maps));
        if (sp.kernel == 0 || sp.out_maps == 0) LayerFail(i, "empty kernel");
        ExpectSize(i, "weight", l.weight, sp.in_maps * sp.kernel);
        ExpectSize(i, "pointwise", l.pointwise, sp.out_maps * sp.in_maps);
        ExpectSize(i, "bias", l.bias, sp.bias ? sp.out_maps : 0);
        s.maps = sp.out_maps;
        break;
      case LayerKind::kBatchNorm:
        if (sp.in_maps != s.maps) LayerFail(i, "batch norm over " + std::to_string(sp.in_maps) + " maps, got " + std::to_string(s.maps));
        ExpectSize(i, "gamma", l.gamma, s.maps);
        ExpectSize(i, "beta", l.beta, s.maps);
        ExpectSize(i, "running_mean", l.running_mean, s.maps);
        ExpectSize(i, "running_var", l.running_var, s.maps);
        for (double v : l.running_var)
          if (!(v > 0.0)) LayerFail(i, "running variance must be > 0");
        if (!(sp.eps > 0.0)) LayerFail(i, "batch norm eps must be > 0");
        break;
      case LayerKind::kElu:
        if (!std::isfinite(sp.alpha)) LayerFail(i, "non-finite elu alpha");
        break;
      case LayerKind::kAvgPool:
        if (sp.pool == 0 || sp.pool > s.cols) LayerFail(i, "pool width exceeds input");
        s.cols /= sp.pool;
        break;
      case LayerKind::kFlatten:
        if (flattened) LayerFail(i, "second flatten");
        flattened = true;
        flatten_index_ = i;
        feature_dim_ = s.size();
        s = {1, 1, feature_dim_};
        break;
      case LayerKind::kDense:
        if (sp.in_features != s.size())
          LayerFail(i, "dense expects " + std::to_string(sp.in_features) + " inputs, got " + std::to_string(s.size()));
        ExpectSize(i, "weight", l.weight, sp.out_features * sp.in_features);
        ExpectSize(i, "bias", l.bias, sp.bias ? sp.out_features : 0);
        s = {1, 1, sp.out_features};
        break;
    }
  }
  Require(flattened, ErrorKind::kLoad, "model has no flatten layer separating features from head");
  Require(layers_.size() > flatten_index_ + 1, ErrorKind::kLoad, "model has no head after flatten");
  num_outputs_ = s.size();
  if (head_kind_ == HeadKind::kRegressor)
    Require(num_outputs_ == 1, ErrorKind::kLoad, "regressor head must output one value");
  else
    Require(num_outputs_ >= 2, ErrorKind::kLoad, "classifier head needs at least two classes");
}

ModelBundle ModelBundle::WithBatchNormStats(std::vector<std::vector<double>> means,
                                            std::vector<std::vector<double>> vars) const {
  ModelBundle out = *this;
  std::size_t j = 0;
  for (Layer& l : out.layers_) {
    if (l.spec.kind != LayerKind::kBatchNorm) continue;
    Require(j < means.size() && j < vars.size(), ErrorKind::kContract, "too few batch norm statistics");
    Require(means[j].size() == l.running_mean.size() && vars[j].size() == l.running_var.size(),
            ErrorKind::kDimension, "batch norm statistic size mismatch");
    l.running_mean = std::move(means[j]);
    l.running_var = std::move(vars[j]);
    ++j;
  }
  return out;
}

Activation TrialToActivation(const Trial& trial) {
  Activation a(1, trial.channels(), trial.samples());
  a.data = trial.data().values();
  return a;
}

namespace {

Activation TemporalConv(const Activation& in, const std::vector<double>& w, const std::vector<double>& bias,
                        std::size_t in_maps, std::size_t out_maps, std::size_t k) {
  Activation out(out_maps, in.rows, in.cols);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((k - 1) / 2);
  const std::ptrdiff_t cols = static_cast<std::ptrdiff_t>(in.cols);
  for (std::size_t o = 0; o < out_maps; ++o) {
    for (std::size_t i = 0; i < in_maps; ++i) {
      const double* kw = &w[(o * in_maps + i) * k];
      for (std::size_t r = 0; r < in.rows; ++r) {
        const double* x = &in.data[(i * in.rows + r) * in.cols];
        double* y = &out.data[(o * out.rows + r) * out.cols];
        for (std::ptrdiff_t t = 0; t < cols; ++t) {
          const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, pad - t);
          const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(k), cols - t + pad);
          double s = 0.0;
          for (std::ptrdiff_t j = lo; j < hi; ++j) s += kw[j] * x[t + j - pad];
          y[t] += s;
        }
      }
    }
    if (!bias.empty())
      for (std::size_t r = 0; r < out.rows; ++r)
        for (std::size_t t = 0; t < out.cols; ++t) out.at(o, r, t) += bias[o];
  }
  return out;
}

}  // namespace

Activation ForwardLayer(const Layer& layer, const Activation& in) {
  const LayerSpec& sp = layer.spec;
  switch (sp.kind) {
    case LayerKind::kConv2dTemporal:
      return TemporalConv(in, layer.weight, layer.bias, sp.in_maps, sp.out_maps, sp.kernel);
    case LayerKind::kDepthwiseConv: {
      const std::size_t mult = sp.out_maps / sp.in_maps;
      Activation out(sp.out_maps, in.rows - sp.kernel + 1, in.cols);
      for (std::size_t o = 0; o < sp.out_maps; ++o) {
        const std::size_t src = o / mult;
        for (std::size_t r = 0; r < out.rows; ++r) {
          double* y = &out.data[(o * out.rows + r) * out.cols];
          for (std::size_t h = 0; h < sp.kernel; ++h) {
            const double w = layer.weight[o * sp.kernel + h];
            const double* x = &in.data[(src * in.rows + r + h) * in.cols];
            for (std::size_t t = 0; t < in.cols; ++t) y[t] += w * x[t];
          }
          if (!layer.bias.empty())
            for (std::size_t t = 0; t < out.cols; ++t) y[t] += layer.bias[o];
        }
      }
      return out;
    }
    case LayerKind::kSeparableConv: {
      // Depthwise temporal stage: each map convolved with its own kernel.
      Activation dw(sp.in_maps, in.rows, in.cols);
      for (std::size_t i = 0; i < sp.in_maps; ++i) {
        Activation single(1, in.rows, in.cols);
        std::copy_n(&in.data[i * in.rows * in.cols], in.rows * in.cols, single.data.begin());
        std::vector<double> kw(layer.weight.begin() + static_cast<std::ptrdiff_t>(i * sp.kernel),
                               layer.weight.begin() + static_cast<std::ptrdiff_t>((i + 1) * sp.kernel));
        Activation y = TemporalConv(single, kw, {}, 1, 1, sp.kernel);
        std::copy(y.data.begin(), y.data.end(), dw.data.begin() + static_cast<std::ptrdiff_t>(i * in.rows * in.cols));
      }
      Activation out(sp.out_maps, in.rows, in.cols);
      const std::size_t plane = in.rows * in.cols;
      for (std::size_t o = 0; o < sp.out_maps; ++o) {
        double* y = &out.data[o * plane];
        for (std::size_t i = 0; i < sp.in_maps; ++i) {
          const double w = layer.pointwise[o * sp.in_maps + i];
          const double* x = &dw.data[i * plane];
          for (std::size_t p = 0; p < plane; ++p) y[p] += w * x[p];
        }
        if (!layer.bias.empty())
          for (std::size_t p = 0; p < plane; ++p) y[p] += layer.bias[o];
      }
      return out;
    }
    case LayerKind::kBatchNorm: {
      Activation out = in;
      const std::size_t plane = in.rows * in.cols;
      for (std::size_t m = 0; m < in.maps; ++m) {
        const double scale = layer.gamma[m] / std::sqrt(layer.running_var[m] + sp.eps);
        const double shift = layer.beta[m] - layer.running_mean[m] * scale;
        for (std::size_t p = 0; p < plane; ++p) out.data[m * plane + p] = in.data[m * plane + p] * scale + shift;
      }
      return out;
    }
    case LayerKind::kElu: {
      Activation out = in;
      for (double& v : out.data)
        if (v < 0.0) v = sp.alpha * std::expm1(v);
      return out;
    }
    case LayerKind::kAvgPool: {
      Activation out(in.maps, in.rows, in.cols / sp.pool);
      const double inv = 1.0 / static_cast<double>(sp.pool);
      for (std::size_t m = 0; m < in.maps; ++m)
        for (std::size_t r = 0; r < in.rows; ++r)
          for (std::size_t t = 0; t < out.cols; ++t) {
            double s = 0.0;
            for (std::size_t j = 0; j < sp.pool; ++j) s += in.at(m, r, t * sp.pool + j);
            out.at(m, r, t) = s * inv;
          }
      return out;
    }
    case LayerKind::kFlatten: {
      Activation out(1, 1, in.data.size());
      out.data = in.data;
      return out;
    }
    case LayerKind::kDense: {
      Activation out(1, 1, sp.out_features);
      for (std::size_t o = 0; o < sp.out_features; ++o) {
        const double* w = &layer.weight[o * sp.in_features];
        double s = layer.bias.empty() ? 0.0 : layer.bias[o];
        for (std::size_t i = 0; i < sp.in_features; ++i) s += w[i] * in.data[i];
        out.data[o] = s;
      }
      return out;
    }
  }
  Fail(ErrorKind::kContract, "unhandled layer kind");
}

FeatureVector Features(const ModelBundle& m, const Trial& trial) {
  Require(trial.channels() == m.input_channels() && trial.samples() == m.input_samples(), ErrorKind::kDimension,
          "model expects " + std::to_string(m.input_channels()) + "x" + std::to_string(m.input_samples()) +
              " input, got " + std::to_string(trial.channels()) + "x" + std::to_string(trial.samples()));
  Activation a = TrialToActivation(trial);
  for (std::size_t i = 0; i <= m.flatten_index(); ++i) a = ForwardLayer(m.layers()[i], a);
  return FeatureVector(std::move(a.data));
}

std::vector<FeatureVector> FeaturesBatch(const ModelBundle& m, std::span<const Trial> trials) {
  std::vector<FeatureVector> out;
  out.reserve(trials.size());
  for (const Trial& t : trials) out.push_back(Features(m, t));
  return out;
}

Prediction Head(const ModelBundle& m, const FeatureVector& f) {
  Require(f.dim() == m.feature_dim(), ErrorKind::kDimension,
          "head expects " + std::to_string(m.feature_dim()) + " features, got " + std::to_string(f.dim()));
  Activation a(1, 1, f.dim());
  a.data = f.values;
  for (std::size_t i = m.flatten_index() + 1; i < m.layers().size(); ++i) a = ForwardLayer(m.layers()[i], a);
  return Prediction{std::move(a.data)};
}

ModelBundle BnAdapt(const ModelBundle& m, std::span<const Trial> batch, double momentum) {
  Require(!batch.empty(), ErrorKind::kContract, "BN-adapt needs a non-empty batch");
  Require(momentum > 0.0 && momentum <= 1.0, ErrorKind::kContract, "BN-adapt momentum must lie in (0, 1]");
  std::vector<Activation> acts;
  acts.reserve(batch.size());
  for (const Trial& t : batch) {
    Require(t.channels() == m.input_channels() && t.samples() == m.input_samples(), ErrorKind::kDimension,
            "BN-adapt batch trial shape mismatch");
    acts.push_back(TrialToActivation(t));
  }
  std::vector<std::vector<double>> means, vars;
  for (std::size_t li = 0; li < m.flatten_index(); ++li) {
    const Layer& layer = m.layers()[li];
    if (layer.spec.kind != LayerKind::kBatchNorm) {
      for (Activation& a : acts) a = ForwardLayer(layer, a);
      continue;
    }
    const std::size_t maps = acts.front().maps;
    const std::size_t plane = acts.front().rows * acts.front().cols;
    const double n = static_cast<double>(plane * acts.size());
    std::vector<double> new_mean(maps), new_var(maps);
    for (std::size_t c = 0; c < maps; ++c) {
      double s = 0.0;
      for (const Activation& a : acts)
        for (std::size_t p = 0; p < plane; ++p) s += a.data[c * plane + p];
      const double mu = s / n;
      double ss = 0.0;
      for (const Activation& a : acts)
        for (std::size_t p = 0; p < plane; ++p) {
          const double d = a.data[c * plane + p] - mu;
          ss += d * d;
        }
      const double biased = ss / n;
      const double unbiased = n > 1.0 ? ss / (n - 1.0) : biased;
      new_mean[c] = (1.0 - momentum) * layer.running_mean[c] + momentum * mu;
      new_var[c] = (1.0 - momentum) * layer.running_var[c] + momentum * unbiased;
      // Training-mode normalization with the batch's own statistics.
      const double scale = layer.gamma[c] / std::sqrt(biased + layer.spec.eps);
      for (Activation& a : acts)
        for (std::size_t p = 0; p < plane; ++p)
          a.data[c * plane + p] = (a.data[c * plane + p] - mu) * scale + layer.beta[c];
    }
    means.push_back(std::move(new_mean));
    vars.push_back(std::move(new_var));
  }
  return m.WithBatchNormStats(std::move(means), std::move(vars));
}

namespace {

Tensor MakeTensor(DType dtype, std::vector<std::size_t> shape, const std::vector<double>& values) {
  return Tensor{dtype, std::move(shape), values};
}

std::vector<double> TakeTensor(const Container& c, const std::string& name, std::size_t expected, std::size_t index) {
  if (expected == 0 && !c.has(name)) return {};
  if (!c.has(name)) LayerFail(index, "missing tensor '" + name + "'");
  const Tensor& t = c.at(name);
  if (t.numel() != expected)
    LayerFail(index, "tensor '" + name + "' has " + std::to_string(t.numel()) + " values, expected " +
                         std::to_string(expected));
  return t.values;
}

}  // namespace

Container ModelToContainer(const ModelBundle& m, DType dtype) {
  Container c;
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t i = 0; i < m.layers().size(); ++i) {
    const Layer& l = m.layers()[i];
    const LayerSpec& sp = l.spec;
    nlohmann::json j = {{"kind", LayerKindName(sp.kind)}};
    const std::string p = "layers." + std::to_string(i) + ".";
    switch (sp.kind) {
      case LayerKind::kConv2dTemporal:
        j.update({{"in_maps", sp.in_maps}, {"out_maps", sp.out_maps}, {"kernel", sp.kernel}, {"bias", sp.bias}});
        c.tensors[p + "weight"] = MakeTensor(dtype, {sp.out_maps, sp.in_maps, 1, sp.kernel}, l.weight);
        break;
      case LayerKind::kDepthwiseConv:
        j.update({{"in_maps", sp.in_maps}, {"out_maps", sp.out_maps}, {"kernel", sp.kernel}, {"bias", sp.bias}});
        c.tensors[p + "weight"] = MakeTensor(dtype, {sp.out_maps, 1, sp.kernel, 1}, l.weight);
        break;
      case LayerKind::kSeparableConv:
        j.update({{"in_maps", sp.in_maps}, {"out_maps", sp.out_maps}, {"kernel", sp.kernel}, {"bias", sp.bias}});
        c.tensors[p + "weight"] = MakeTensor(dtype, {sp.in_maps, 1, 1, sp.kernel}, l.weight);
        c.tensors[p + "pointwise"] = MakeTensor(dtype, {sp.out_maps, sp.in_maps, 1, 1}, l.pointwise);
        break;
      case LayerKind::kBatchNorm:
        j.update({{"maps", sp.in_maps}, {"eps", sp.eps}, {"momentum", sp.momentum}});
        c.tensors[p + "gamma"] = MakeTensor(dtype, {sp.in_maps}, l.gamma);
        c.tensors[p + "beta"] = MakeTensor(dtype, {sp.in_maps}, l.beta);
        c.tensors[p + "running_mean"] = MakeTensor(dtype, {sp.in_maps}, l.running_mean);
        c.tensors[p + "running_var"] = MakeTensor(dtype, {sp.in_maps}, l.running_var);
        break;
      case LayerKind::kElu: j["alpha"] = sp.alpha; break;
      case LayerKind::kAvgPool: j["pool"] = sp.pool; break;
      case LayerKind::kFlatten: break;
      case LayerKind::kDense:
        j.update({{"in_features", sp.in_features}, {"out_features", sp.out_features}, {"bias", sp.bias}});
        c.tensors[p + "weight"] = MakeTensor(dtype, {sp.out_features, sp.in_features}, l.weight);
        break;
    }
    if (!l.bias.empty()) c.tensors[p + "bias"] = MakeTensor(dtype, {l.bias.size()}, l.bias);
    layers.push_back(j);
  }
  c.manifest = {
      {"format", "bft-model"},
      {"kind", "backbone"},
      {"head", {{"kind", m.head_kind() == HeadKind::kClassifier ? "classifier" : "regressor"},
                {"outputs", m.num_outputs()}}},
      {"input", {{"channels", m.input_channels()}, {"samples", m.input_samples()}, {"rate_hz", m.rate_hz()}}},
      {"layers", layers},
      {"metadata", m.metadata()},
  };
  return c;
}

ModelBundle ModelFromContainer(const Container& c) {
  const nlohmann::json& man = c.manifest;
  try {
    Require(man.value("format", "") == "bft-model", ErrorKind::kLoad, "container is not a bft-model");
    const std::string head = man.at("head").at("kind").get<std::string>();
    Require(head == "classifier" || head == "regressor", ErrorKind::kLoad, "unknown head kind '" + head + "'");
    const auto& input = man.at("input");
    std::vector<Layer> layers;
    const auto& jl = man.at("layers");
    for (std::size_t i = 0; i < jl.size(); ++i) {
      const auto& j = jl[i];
      Layer l;
      LayerSpec& sp = l.spec;
      sp.kind = ParseLayerKind(j.at("kind").get<std::string>());
      const std::string p = "layers." + std::to_string(i) + ".";
      switch (sp.kind) {
        case LayerKind::kConv2dTemporal:
        case LayerKind::kDepthwiseConv:
        case LayerKind::kSeparableConv:
          sp.in_maps = j.at("in_maps");
          sp.out_maps = j.at("out_maps");
          sp.kernel = j.at("kernel");
          sp.bias = j.value("bias", false);
          if (sp.kind == LayerKind::kConv2dTemporal)
            l.weight = TakeTensor(c, p + "weight", sp.out_maps * sp.in_maps * sp.kernel, i);
          else if (sp.kind == LayerKind::kDepthwiseConv)
            l.weight = TakeTensor(c, p + "weight", sp.out_maps * sp.kernel, i);
          else {
            l.weight = TakeTensor(c, p + "weight", sp.in_maps * sp.kernel, i);
            l.pointwise = TakeTensor(c, p + "pointwise", sp.out_maps * sp.in_maps, i);
          }
          l.bias = TakeTensor(c, p + "bias", sp.bias ? sp.out_maps : 0, i);
          break;
        case LayerKind::kBatchNorm:
          sp.in_maps = j.at("maps");
          sp.out_maps = sp.in_maps;
          sp.eps = j.value("eps", 1e-5);
          sp.momentum = j.value("momentum", 0.1);
          l.gamma = TakeTensor(c, p + "gamma", sp.in_maps, i);
          l.beta = TakeTensor(c, p + "beta", sp.in_maps, i);
          l.running_mean = TakeTensor(c, p + "running_mean", sp.in_maps, i);
          l.running_var = TakeTensor(c, p + "running_var", sp.in_maps, i);
          break;
        case LayerKind::kElu: sp.alpha = j.value("alpha", 1.0); break;
        case LayerKind::kAvgPool: sp.pool = j.at("pool"); break;
        case LayerKind::kFlatten: break;
        case LayerKind::kDense:
          sp.in_features = j.at("in_features");
          sp.out_features = j.at("out_features");
          sp.bias = j.value("bias", true);
          l.weight = TakeTensor(c, p + "weight", sp.out_features * sp.in_features, i);
          l.bias = TakeTensor(c, p + "bias", sp.bias ? sp.out_features : 0, i);
          break;
      }
      layers.push_back(std::move(l));
    }
    return ModelBundle(std::move(layers), head == "classifier" ? HeadKind::kClassifier : HeadKind::kRegressor,
                       input.at("channels").get<std::size_t>(), input.at("samples").get<std::size_t>(),
                       input.at("rate_hz").get<double>(), man.value("metadata", nlohmann::json::object()));
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kLoad, std::string("malformed model manifest: ") + e.what());
  }
}

ModelBundle LoadModel(std::span<const std::uint8_t> bytes) { return ModelFromContainer(ParseContainer(bytes)); }

ModelBundle LoadModelFile(const std::filesystem::path& path) { return LoadModel(ReadFileBytes(path)); }

void SaveModelFile(const std::filesystem::path& path, const ModelBundle& m, DType dtype) {
  WriteContainerFile(path, ModelToContainer(m, dtype));
}

}  // namespace bft

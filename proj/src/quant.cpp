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

#include "bft/quant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "bft/error.hpp"

namespace bft {

QuantParams ChooseQuantParams(double lo, double hi) {
  Require(std::isfinite(lo) && std::isfinite(hi) && lo <= hi, ErrorKind::kNumerical, "invalid quantization range");
  lo = std::min(lo, 0.0);
  hi = std::max(hi, 0.0);
  if (hi - lo <= 0.0) return {1.0, 0};
  const double s0 = (hi - lo) / 255.0;
  int zp = static_cast<int>(std::lround(-128.0 - lo / s0));
  zp = std::clamp(zp, lo < 0.0 ? -127 : -128, hi > 0.0 ? 126 : 127);
  // Stretch the step so both range ends land on the grid around an exact zero.
  double scale = 0.0;
  if (lo < 0.0) scale = std::max(scale, -lo / static_cast<double>(zp + 128));
  if (hi > 0.0) scale = std::max(scale, hi / static_cast<double>(127 - zp));
  return {scale, zp};
}

std::int8_t QuantizeValue(double v, const QuantParams& p) {
  const double q = std::nearbyint(v / p.scale) + p.zero_point;
  return static_cast<std::int8_t>(std::clamp(q, -128.0, 127.0));
}

double DequantizeValue(int q, const QuantParams& p) { return p.scale * static_cast<double>(q - p.zero_point); }

QuantTensor QuantizeTensor(std::span<const double> values) {
  QuantTensor t;
  if (values.empty()) return t;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  t.params = ChooseQuantParams(*lo, *hi);
  t.q.reserve(values.size());
  for (double v : values) t.q.push_back(QuantizeValue(v, t.params));
  return t;
}

std::vector<double> DequantizeTensor(const QuantTensor& t) {
  std::vector<double> out;
  out.reserve(t.q.size());
  for (std::int8_t q : t.q) out.push_back(DequantizeValue(q, t.params));
  return out;
}

FixedPointMultiplier MakeFixedPointMultiplier(double real) {
  Require(real > 0.0 && std::isfinite(real), ErrorKind::kNumerical, "requantization multiplier must be positive");
  int exp = 0;
  const double frac = std::frexp(real, &exp);  // real = frac · 2^exp, frac ∈ [0.5, 1)
  std::int64_t m0 = std::llround(frac * static_cast<double>(1LL << 31));
  if (m0 == (1LL << 31)) {
    m0 /= 2;
    ++exp;
  }
  FixedPointMultiplier out{m0, 31 - exp};
  Require(out.shift > 0 && out.shift < 63, ErrorKind::kNumerical, "requantization multiplier out of range");
  return out;
}

std::int64_t ApplyMultiplier(std::int64_t acc, const FixedPointMultiplier& m) {
  const bool neg = acc < 0;
  const unsigned __int128 prod = static_cast<unsigned __int128>(neg ? -acc : acc) * static_cast<unsigned __int128>(m.multiplier);
  const unsigned __int128 half = static_cast<unsigned __int128>(1) << (m.shift - 1);
  const auto mag = static_cast<std::int64_t>((prod + half) >> m.shift);
  return neg ? -mag : mag;
}

namespace {

std::int8_t Saturate(std::int64_t v) { return static_cast<std::int8_t>(std::clamp<std::int64_t>(v, -128, 127)); }

struct QActivation {
  std::size_t maps = 0, rows = 0, cols = 0;
  std::vector<std::int8_t> data;
};

// Float twin of a QOp used for calibration.
struct FloatOp {
  QOpKind kind;
  std::size_t in_maps = 0, out_maps = 0, kernel = 0, pool = 0, in_features = 0, out_features = 0;
  double alpha = 1.0;
  std::vector<double> weight, bias, channel_scale;
};

std::vector<FloatOp> LowerToOps(const ModelBundle& folded, const std::vector<std::vector<double>>* scales,
                                std::size_t& flatten_op) {
  std::vector<FloatOp> ops;
  for (std::size_t li = 0; li < folded.layers().size(); ++li) {
    const Layer& l = folded.layers()[li];
    const LayerSpec& sp = l.spec;
    FloatOp op{};
    if (scales) op.channel_scale = (*scales)[li];
    op.in_maps = sp.in_maps;
    op.out_maps = sp.out_maps;
    op.kernel = sp.kernel;
    op.pool = sp.pool;
    op.in_features = sp.in_features;
    op.out_features = sp.out_features;
    op.alpha = sp.alpha;
    switch (sp.kind) {
      case LayerKind::kConv2dTemporal:
        op.kind = QOpKind::kTemporalConv;
        op.weight = l.weight;
        op.bias = l.bias.empty() ? std::vector<double>(sp.out_maps, 0.0) : l.bias;
        ops.push_back(op);
        break;
      case LayerKind::kDepthwiseConv:
        op.kind = QOpKind::kDepthwise;
        op.weight = l.weight;
        op.bias = l.bias.empty() ? std::vector<double>(sp.out_maps, 0.0) : l.bias;
        ops.push_back(op);
        break;
      case LayerKind::kSeparableConv: {
        FloatOp dw = op;
        dw.channel_scale.clear();
        dw.kind = QOpKind::kSeparableDepthwise;
        dw.out_maps = sp.in_maps;
        dw.weight = l.weight;
        dw.bias.assign(sp.in_maps, 0.0);
        ops.push_back(dw);
        op.kind = QOpKind::kPointwise;
        op.kernel = 1;
        op.weight = l.pointwise;
        op.bias = l.bias.empty() ? std::vector<double>(sp.out_maps, 0.0) : l.bias;
        ops.push_back(op);
        break;
      }
      case LayerKind::kElu: op.kind = QOpKind::kElu; ops.push_back(op); break;
      case LayerKind::kAvgPool: op.kind = QOpKind::kAvgPool; ops.push_back(op); break;
      case LayerKind::kFlatten:
        op.kind = QOpKind::kFlatten;
        flatten_op = ops.size();
        ops.push_back(op);
        break;
      case LayerKind::kDense:
        op.kind = QOpKind::kDense;
        op.weight = l.weight;
        op.bias = l.bias.empty() ? std::vector<double>(sp.out_features, 0.0) : l.bias;
        ops.push_back(op);
        break;
      case LayerKind::kBatchNorm:
        Fail(ErrorKind::kContract, "unfolded batch norm reached quantization");
    }
  }
  return ops;
}

Layer FloatOpAsLayer(const FloatOp& op) {
  Layer l;
  LayerSpec& sp = l.spec;
  sp.in_maps = op.in_maps;
  sp.out_maps = op.out_maps;
  sp.kernel = op.kernel;
  sp.pool = op.pool;
  sp.in_features = op.in_features;
  sp.out_features = op.out_features;
  sp.alpha = op.alpha;
  l.weight = op.weight;
  l.bias = op.bias;
  sp.bias = !op.bias.empty();
  switch (op.kind) {
    case QOpKind::kTemporalConv: sp.kind = LayerKind::kConv2dTemporal; break;
    case QOpKind::kDepthwise: sp.kind = LayerKind::kDepthwiseConv; break;
    case QOpKind::kSeparableDepthwise:
      sp.kind = LayerKind::kConv2dTemporal;  // handled per map below
      break;
    case QOpKind::kPointwise: sp.kind = LayerKind::kSeparableConv; break;
    case QOpKind::kElu: sp.kind = LayerKind::kElu; break;
    case QOpKind::kAvgPool: sp.kind = LayerKind::kAvgPool; break;
    case QOpKind::kFlatten: sp.kind = LayerKind::kFlatten; break;
    case QOpKind::kDense: sp.kind = LayerKind::kDense; break;
  }
  return l;
}

Activation ForwardFloatOp(const FloatOp& op, const Activation& in) {
  if (op.kind == QOpKind::kSeparableDepthwise) {
    Activation out(in.maps, in.rows, in.cols);
    const std::size_t plane = in.rows * in.cols;
    for (std::size_t i = 0; i < in.maps; ++i) {
      Layer l;
      l.spec.kind = LayerKind::kConv2dTemporal;
      l.spec.in_maps = 1;
      l.spec.out_maps = 1;
      l.spec.kernel = op.kernel;
      l.weight.assign(op.weight.begin() + static_cast<std::ptrdiff_t>(i * op.kernel),
                      op.weight.begin() + static_cast<std::ptrdiff_t>((i + 1) * op.kernel));
      Activation single(1, in.rows, in.cols);
      std::copy_n(in.data.begin() + static_cast<std::ptrdiff_t>(i * plane), plane, single.data.begin());
      Activation y = ForwardLayer(l, single);
      std::copy(y.data.begin(), y.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(i * plane));
    }
    return out;
  }
  if (op.kind == QOpKind::kPointwise) {
    Layer l = FloatOpAsLayer(op);
    // Pointwise stage as a separable conv with an identity temporal kernel.
    l.spec.kernel = 1;
    l.pointwise = op.weight;
    l.weight.assign(op.in_maps, 1.0);
    return ForwardLayer(l, in);
  }
  return ForwardLayer(FloatOpAsLayer(op), in);
}

struct RangeTracker {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  std::vector<double> samples;

  void Add(const std::vector<double>& v, bool keep) {
    for (double x : v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    if (keep) samples.insert(samples.end(), v.begin(), v.end());
  }

  QuantParams Params(const CalibrationOptions& opts) {
    if (!opts.percentile_clip || samples.empty()) return ChooseQuantParams(lo, hi);
    std::sort(samples.begin(), samples.end());
    const double p = std::clamp(opts.percentile, 50.0, 100.0) / 100.0;
    const auto idx = [&](double q) {
      return static_cast<std::size_t>(std::llround(q * static_cast<double>(samples.size() - 1)));
    };
    return ChooseQuantParams(samples[idx(1.0 - p)], samples[idx(p)]);
  }
};

std::vector<std::int32_t> QuantizeBias(const std::vector<double>& bias, double scale) {
  std::vector<std::int32_t> out;
  out.reserve(bias.size());
  for (double b : bias) {
    const double q = std::nearbyint(b / scale);
    Require(std::isfinite(q), ErrorKind::kNumerical, "bias is not finite after quantization");
    Require(std::abs(q) < 2.0e9, ErrorKind::kNumerical, "bias does not fit in int32 after quantization");
    out.push_back(static_cast<std::int32_t>(q));
  }
  return out;
}

std::vector<std::int32_t> Centered(const std::vector<std::int8_t>& q, int zp) {
  std::vector<std::int32_t> out(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) out[i] = static_cast<std::int32_t>(q[i]) - zp;
  return out;
}

QActivation RunIntConv(const QOp& op, const QActivation& in, bool final_real, std::vector<double>* real_out) {
  const std::vector<std::int32_t> w = Centered(op.weight.q, op.weight.params.zero_point);
  const std::vector<std::int32_t> x = Centered(in.data, op.in.zero_point);
  QActivation out;
  std::vector<std::int64_t> acc;
  switch (op.kind) {
    case QOpKind::kTemporalConv:
    case QOpKind::kSeparableDepthwise: {
      const bool depthwise = op.kind == QOpKind::kSeparableDepthwise;
      const std::size_t out_maps = depthwise ? in.maps : op.out_maps;
      out = {out_maps, in.rows, in.cols, {}};
      acc.assign(out_maps * in.rows * in.cols, 0);
      const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((op.kernel - 1) / 2);
      const std::ptrdiff_t cols = static_cast<std::ptrdiff_t>(in.cols);
      const std::size_t k = op.kernel;
      for (std::size_t o = 0; o < out_maps; ++o) {
        const std::size_t i_lo = depthwise ? o : 0;
        const std::size_t i_hi = depthwise ? o + 1 : op.in_maps;
        for (std::size_t i = i_lo; i < i_hi; ++i) {
          const std::int32_t* kw = depthwise ? &w[o * k] : &w[(o * op.in_maps + i) * k];
          for (std::size_t r = 0; r < in.rows; ++r) {
            const std::int32_t* xr = &x[(i * in.rows + r) * in.cols];
            std::int64_t* yr = &acc[(o * in.rows + r) * in.cols];
            for (std::ptrdiff_t t = 0; t < cols; ++t) {
              const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, pad - t);
              const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(k), cols - t + pad);
              std::int64_t s = 0;
              for (std::ptrdiff_t j = lo; j < hi; ++j) s += static_cast<std::int64_t>(kw[j]) * xr[t + j - pad];
              yr[t] += s;
            }
          }
        }
        if (!op.bias.empty())
          for (std::size_t p = 0; p < in.rows * in.cols; ++p) acc[o * in.rows * in.cols + p] += op.bias[o];
      }
      break;
    }
    case QOpKind::kDepthwise: {
      const std::size_t mult_d = op.out_maps / op.in_maps;
      const std::size_t rows = in.rows - op.kernel + 1;
      out = {op.out_maps, rows, in.cols, {}};
      acc.assign(op.out_maps * rows * in.cols, 0);
      for (std::size_t o = 0; o < op.out_maps; ++o) {
        const std::size_t src = o / mult_d;
        for (std::size_t r = 0; r < rows; ++r) {
          std::int64_t* y = &acc[(o * rows + r) * in.cols];
          for (std::size_t h = 0; h < op.kernel; ++h) {
            const std::int64_t wv = w[o * op.kernel + h];
            const std::int32_t* xr = &x[(src * in.rows + r + h) * in.cols];
            for (std::size_t t = 0; t < in.cols; ++t) y[t] += wv * xr[t];
          }
          for (std::size_t t = 0; t < in.cols; ++t) y[t] += op.bias[o];
        }
      }
      break;
    }
    case QOpKind::kPointwise: {
      const std::size_t plane = in.rows * in.cols;
      out = {op.out_maps, in.rows, in.cols, {}};
      acc.assign(op.out_maps * plane, 0);
      for (std::size_t o = 0; o < op.out_maps; ++o) {
        std::int64_t* y = &acc[o * plane];
        for (std::size_t i = 0; i < op.in_maps; ++i) {
          const std::int64_t wv = w[o * op.in_maps + i];
          const std::int32_t* xr = &x[i * plane];
          for (std::size_t p = 0; p < plane; ++p) y[p] += wv * xr[p];
        }
        for (std::size_t p = 0; p < plane; ++p) y[p] += op.bias[o];
      }
      break;
    }
    case QOpKind::kDense: {
      out = {1, 1, op.out_features, {}};
      acc.assign(op.out_features, 0);
      for (std::size_t o = 0; o < op.out_features; ++o) {
        std::int64_t s = op.bias[o];
        const std::int32_t* wr = &w[o * op.in_features];
        for (std::size_t i = 0; i < op.in_features; ++i) s += static_cast<std::int64_t>(wr[i]) * x[i];
        acc[o] = s;
      }
      break;
    }
    default: Fail(ErrorKind::kContract, "not a convolution op");
  }
  const std::size_t maps = op.kind == QOpKind::kDense ? op.out_features : out.maps;
  const std::size_t plane = acc.size() / maps;
  const double base = op.weight.params.scale * op.in.scale;
  const auto channel = [&](std::size_t c) { return op.channel_scale.empty() ? 1.0 : op.channel_scale[c]; };
  if (final_real) {
    real_out->resize(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) (*real_out)[i] = static_cast<double>(acc[i]) * base * channel(i / plane);
    return out;
  }
  out.data.resize(acc.size());
  for (std::size_t c = 0; c < maps; ++c) {
    const double cs = channel(c);
    const FixedPointMultiplier mult = MakeFixedPointMultiplier(base * std::abs(cs) / op.out.scale);
    const std::int64_t sign = cs < 0.0 ? -1 : 1;
    for (std::size_t p = c * plane; p < (c + 1) * plane; ++p)
      out.data[p] = Saturate(op.out.zero_point + ApplyMultiplier(sign * acc[p], mult));
  }
  return out;
}

QActivation RunIntOp(const QOp& op, const QActivation& in) {
  switch (op.kind) {
    case QOpKind::kElu: {
      QActivation out = in;
      for (std::int8_t& v : out.data) v = op.lut[static_cast<std::size_t>(static_cast<int>(v) + 128)];
      return out;
    }
    case QOpKind::kAvgPool: {
      QActivation out{in.maps, in.rows, in.cols / op.pool, {}};
      out.data.resize(out.maps * out.rows * out.cols);
      const auto p = static_cast<std::int64_t>(op.pool);
      for (std::size_t m = 0; m < in.maps; ++m)
        for (std::size_t r = 0; r < in.rows; ++r)
          for (std::size_t t = 0; t < out.cols; ++t) {
            std::int64_t s = 0;
            for (std::size_t j = 0; j < op.pool; ++j)
              s += static_cast<std::int64_t>(in.data[(m * in.rows + r) * in.cols + t * op.pool + j]) - op.in.zero_point;
            const std::int64_t avg = s >= 0 ? (s + p / 2) / p : -((-s + p / 2) / p);
            out.data[(m * out.rows + r) * out.cols + t] = Saturate(avg + op.out.zero_point);
          }
      return out;
    }
    case QOpKind::kFlatten: {
      QActivation out{1, 1, in.data.size(), in.data};
      return out;
    }
    default: return RunIntConv(op, in, false, nullptr);
  }
}

}  // namespace

QuantModel::QuantModel(std::vector<QOp> ops, QuantParams input, HeadKind head_kind, std::size_t channels,
                       std::size_t samples, double rate_hz)
    : ops_(std::move(ops)), input_(input), head_kind_(head_kind), channels_(channels), samples_(samples),
      rate_hz_(rate_hz) {
  Require(!ops_.empty(), ErrorKind::kLoad, "quantized model has no ops");
  bool found = false;
  for (std::size_t i = 0; i < ops_.size(); ++i) {
    if (ops_[i].kind == QOpKind::kFlatten) {
      Require(!found, ErrorKind::kLoad, "quantized model has two flatten ops");
      flatten_op_ = i;
      found = true;
    }
  }
  Require(found, ErrorKind::kLoad, "quantized model has no flatten op");
  Require(ops_.back().kind == QOpKind::kDense, ErrorKind::kLoad, "quantized model must end in a dense op");
  // Feature size: run shape arithmetic over the extractor ops.
  std::size_t maps = 1, rows = channels_, cols = samples_;
  for (std::size_t i = 0; i < flatten_op_; ++i) {
    const QOp& op = ops_[i];
    switch (op.kind) {
      case QOpKind::kTemporalConv:
      case QOpKind::kPointwise: maps = op.out_maps; break;
      case QOpKind::kDepthwise:
        maps = op.out_maps;
        rows = rows - op.kernel + 1;
        break;
      case QOpKind::kAvgPool: cols /= op.pool; break;
      default: break;
    }
  }
  feature_dim_ = maps * rows * cols;
  num_outputs_ = ops_.back().out_features;
}

namespace {

// Folds every batch norm into the preceding convolution's bias. The per-map
// scale goes into the weights, or into `scales` (indexed like the output
// layers) when given.
ModelBundle FoldImpl(const ModelBundle& m, std::vector<std::vector<double>>* scales) {
  std::vector<Layer> out;
  if (scales) scales->clear();
  for (std::size_t i = 0; i < m.layers().size(); ++i) {
    const Layer& l = m.layers()[i];
    if (l.spec.kind != LayerKind::kBatchNorm) {
      out.push_back(l);
      if (scales) scales->emplace_back();
      continue;
    }
    Require(!out.empty(), ErrorKind::kContract, "batch norm at layer " + std::to_string(i) + " has no preceding conv");
    Layer& conv = out.back();
    const LayerKind pk = conv.spec.kind;
    Require(pk == LayerKind::kConv2dTemporal || pk == LayerKind::kDepthwiseConv || pk == LayerKind::kSeparableConv,
            ErrorKind::kContract, "batch norm at layer " + std::to_string(i) + " does not follow a convolution");
    const std::size_t maps = conv.spec.out_maps;
    if (conv.bias.empty()) conv.bias.assign(maps, 0.0);
    conv.spec.bias = true;
    std::vector<double>& w = pk == LayerKind::kSeparableConv ? conv.pointwise : conv.weight;
    const std::size_t per_map = w.size() / maps;
    std::vector<double> s(maps);
    for (std::size_t c = 0; c < maps; ++c) {
      s[c] = l.gamma[c] / std::sqrt(l.running_var[c] + l.spec.eps);
      conv.bias[c] = (conv.bias[c] - l.running_mean[c]) * s[c] + l.beta[c];
    }
    std::vector<double>* split = scales ? &scales->back() : nullptr;
    if (split) {
      Require(split->empty(), ErrorKind::kContract, "batch norm at layer " + std::to_string(i) + " follows another batch norm");
      split->assign(maps, 1.0);
    }
    for (std::size_t c = 0; c < maps; ++c) {
      // A zero scale cannot be carried by the requantization multiplier.
      if (split && s[c] != 0.0) {
        (*split)[c] = s[c];
        conv.bias[c] /= s[c];
      } else {
        for (std::size_t j = 0; j < per_map; ++j) w[c * per_map + j] *= s[c];
      }
    }
  }
  return ModelBundle(std::move(out), m.head_kind(), m.input_channels(), m.input_samples(), m.rate_hz(), m.metadata());
}

}  // namespace

ModelBundle FoldBatchNorm(const ModelBundle& m) { return FoldImpl(m, nullptr); }

QuantModel Quantize(const ModelBundle& m, std::span<const Trial> calib, const CalibrationOptions& opts) {
  Require(!calib.empty(), ErrorKind::kContract, "quantization needs a non-empty calibration set");
  const ModelBundle folded = FoldBatchNorm(m);
  std::size_t flatten_op = 0;
  const std::vector<FloatOp> fops = LowerToOps(folded, nullptr, flatten_op);
  // Same ops with the batch-norm scale kept out of the weights.
  std::vector<std::vector<double>> scales;
  const ModelBundle split = FoldImpl(m, &scales);
  const std::vector<FloatOp> sops = LowerToOps(split, &scales, flatten_op);

  RangeTracker input_range;
  std::vector<RangeTracker> ranges(fops.size());
  for (const Trial& t : calib) {
    Require(t.channels() == m.input_channels() && t.samples() == m.input_samples(), ErrorKind::kDimension,
            "calibration trial shape does not match the model input");
    Activation a = TrialToActivation(t);
    input_range.Add(a.data, opts.percentile_clip);
    for (std::size_t i = 0; i < fops.size(); ++i) {
      a = ForwardFloatOp(fops[i], a);
      ranges[i].Add(a.data, opts.percentile_clip);
    }
  }

  const QuantParams input = input_range.Params(opts);
  std::vector<QOp> qops;
  QuantParams prev = input;
  for (std::size_t i = 0; i < fops.size(); ++i) {
    const FloatOp& f = fops[i];
    QOp q;
    q.kind = f.kind;
    q.in_maps = f.in_maps;
    q.out_maps = f.out_maps;
    q.kernel = f.kernel;
    q.pool = f.pool;
    q.in_features = f.in_features;
    q.out_features = f.out_features;
    q.in = prev;
    switch (f.kind) {
      case QOpKind::kAvgPool:
      case QOpKind::kFlatten: q.out = prev; break;
      case QOpKind::kElu: {
        q.out = ranges[i].Params(opts);
        q.lut.resize(256);
        for (int v = -128; v <= 127; ++v) {
          const double x = DequantizeValue(v, q.in);
          const double y = x < 0.0 ? f.alpha * std::expm1(x) : x;
          q.lut[static_cast<std::size_t>(v + 128)] = QuantizeValue(y, q.out);
        }
        break;
      }
      default:
        q.out = ranges[i].Params(opts);
        q.weight = QuantizeTensor(sops[i].weight);
        q.channel_scale = sops[i].channel_scale;
        q.bias = QuantizeBias(sops[i].bias, q.weight.params.scale * q.in.scale);
        break;
    }
    prev = q.out;
    qops.push_back(std::move(q));
  }
  return QuantModel(std::move(qops), input, m.head_kind(), m.input_channels(), m.input_samples(), m.rate_hz());
}

FeatureVector FeaturesQ(const QuantModel& q, const Trial& trial) {
  Require(trial.channels() == q.input_channels() && trial.samples() == q.input_samples(), ErrorKind::kDimension,
          "quantized model input shape mismatch");
  QActivation a{1, trial.channels(), trial.samples(), {}};
  a.data.reserve(trial.data().values().size());
  for (double v : trial.data().values()) a.data.push_back(QuantizeValue(v, q.input_params()));
  for (std::size_t i = 0; i <= q.flatten_op(); ++i) a = RunIntOp(q.ops()[i], a);
  const QuantParams& p = q.ops()[q.flatten_op()].out;
  FeatureVector f;
  f.values.reserve(a.data.size());
  for (std::int8_t v : a.data) f.values.push_back(DequantizeValue(v, p));
  return f;
}

Prediction HeadQ(const QuantModel& q, const FeatureVector& f) {
  Require(f.dim() == q.feature_dim(), ErrorKind::kDimension, "quantized head feature size mismatch");
  const QuantParams& p = q.ops()[q.flatten_op()].out;
  QActivation a{1, 1, f.dim(), {}};
  a.data.reserve(f.dim());
  for (double v : f.values) a.data.push_back(QuantizeValue(v, p));
  const std::size_t last = q.ops().size() - 1;
  for (std::size_t i = q.flatten_op() + 1; i < last; ++i) a = RunIntOp(q.ops()[i], a);
  Prediction out;
  RunIntConv(q.ops()[last], a, true, &out.values);
  return out;
}

Prediction ForwardQ(const QuantModel& q, const Trial& trial) { return HeadQ(q, FeaturesQ(q, trial)); }

namespace {

const char* QOpName(QOpKind k) {
  switch (k) {
    case QOpKind::kTemporalConv: return "temporal_conv";
    case QOpKind::kDepthwise: return "depthwise";
    case QOpKind::kSeparableDepthwise: return "separable_depthwise";
    case QOpKind::kPointwise: return "pointwise";
    case QOpKind::kElu: return "elu";
    case QOpKind::kAvgPool: return "avg_pool";
    case QOpKind::kFlatten: return "flatten";
    case QOpKind::kDense: return "dense";
  }
  return "?";
}

QOpKind ParseQOp(const std::string& s) {
  for (QOpKind k : {QOpKind::kTemporalConv, QOpKind::kDepthwise, QOpKind::kSeparableDepthwise, QOpKind::kPointwise,
                    QOpKind::kElu, QOpKind::kAvgPool, QOpKind::kFlatten, QOpKind::kDense}) {
    if (s == QOpName(k)) return k;
  }
  Fail(ErrorKind::kLoad, "unknown quantized op '" + s + "'");
}

nlohmann::json ParamsJson(const QuantParams& p) { return {{"scale", p.scale}, {"zero_point", p.zero_point}}; }
QuantParams ParamsFromJson(const nlohmann::json& j) { return {j.at("scale").get<double>(), j.at("zero_point").get<int>()}; }

}  // namespace

Container QuantModelToContainer(const QuantModel& q) {
  Container c;
  nlohmann::json ops = nlohmann::json::array();
  for (std::size_t i = 0; i < q.ops().size(); ++i) {
    const QOp& op = q.ops()[i];
    const std::string p = "ops." + std::to_string(i) + ".";
    nlohmann::json j = {{"kind", QOpName(op.kind)}, {"in_maps", op.in_maps},         {"out_maps", op.out_maps},
                        {"kernel", op.kernel},      {"pool", op.pool},               {"in_features", op.in_features},
                        {"out_features", op.out_features}, {"in", ParamsJson(op.in)}, {"out", ParamsJson(op.out)}};
    if (!op.weight.q.empty()) {
      j["weight_quant"] = ParamsJson(op.weight.params);
      c.tensors[p + "weight"] =
          Tensor{DType::kI8, {op.weight.q.size()}, std::vector<double>(op.weight.q.begin(), op.weight.q.end())};
      c.tensors[p + "bias"] = Tensor{DType::kI32, {op.bias.size()}, std::vector<double>(op.bias.begin(), op.bias.end())};
      if (!op.channel_scale.empty())
        c.tensors[p + "channel_scale"] = Tensor{DType::kF64, {op.channel_scale.size()}, op.channel_scale};
    }
    if (!op.lut.empty())
      c.tensors[p + "lut"] = Tensor{DType::kI8, {256}, std::vector<double>(op.lut.begin(), op.lut.end())};
    ops.push_back(j);
  }
  c.manifest = {
      {"format", "bft-model"},
      {"kind", "quantized"},
      {"head", {{"kind", q.head_kind() == HeadKind::kClassifier ? "classifier" : "regressor"}, {"outputs", q.num_outputs()}}},
      {"input", {{"channels", q.input_channels()}, {"samples", q.input_samples()}, {"rate_hz", q.rate_hz()}}},
      {"input_quant", ParamsJson(q.input_params())},
      {"ops", ops},
  };
  return c;
}

QuantModel QuantModelFromContainer(const Container& c) {
  const nlohmann::json& man = c.manifest;
  try {
    Require(man.value("format", "") == "bft-model" && man.value("kind", "") == "quantized", ErrorKind::kLoad,
            "container is not a quantized bft-model");
    std::vector<QOp> ops;
    const auto& jo = man.at("ops");
    for (std::size_t i = 0; i < jo.size(); ++i) {
      const auto& j = jo[i];
      QOp op;
      op.kind = ParseQOp(j.at("kind").get<std::string>());
      op.in_maps = j.at("in_maps");
      op.out_maps = j.at("out_maps");
      op.kernel = j.at("kernel");
      op.pool = j.at("pool");
      op.in_features = j.at("in_features");
      op.out_features = j.at("out_features");
      op.in = ParamsFromJson(j.at("in"));
      op.out = ParamsFromJson(j.at("out"));
      const std::string p = "ops." + std::to_string(i) + ".";
      if (j.contains("weight_quant")) {
        op.weight.params = ParamsFromJson(j.at("weight_quant"));
        for (double v : c.at(p + "weight").values) op.weight.q.push_back(static_cast<std::int8_t>(v));
        for (double v : c.at(p + "bias").values) op.bias.push_back(static_cast<std::int32_t>(v));
        if (c.has(p + "channel_scale")) op.channel_scale = c.at(p + "channel_scale").values;
        Require(op.channel_scale.empty() ||
                    op.channel_scale.size() == (op.kind == QOpKind::kDense ? op.out_features : op.out_maps),
                ErrorKind::kLoad, "op " + std::to_string(i) + ": channel_scale size mismatch");
      }
      if (c.has(p + "lut"))
        for (double v : c.at(p + "lut").values) op.lut.push_back(static_cast<std::int8_t>(v));
      if (op.kind == QOpKind::kElu) Require(op.lut.size() == 256, ErrorKind::kLoad, "op " + std::to_string(i) + ": elu LUT missing");
      ops.push_back(std::move(op));
    }
    const auto& input = man.at("input");
    return QuantModel(std::move(ops), ParamsFromJson(man.at("input_quant")),
                      man.at("head").at("kind").get<std::string>() == "classifier" ? HeadKind::kClassifier
                                                                                   : HeadKind::kRegressor,
                      input.at("channels"), input.at("samples"), input.at("rate_hz"));
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kLoad, std::string("malformed quantized manifest: ") + e.what());
  }
}

void SaveQuantModelFile(const std::filesystem::path& path, const QuantModel& q) {
  WriteContainerFile(path, QuantModelToContainer(q));
}

QuantModel LoadQuantModelFile(const std::filesystem::path& path) {
  return QuantModelFromContainer(ReadContainerFile(path));
}

}  // namespace bft

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

#include "bft/rank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bft/error.hpp"
#include "bft/numerics.hpp"

namespace bft {

std::vector<double> AverageRanks(std::span<const double> values, bool descending) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return descending ? values[a] > values[b] : values[a] < values[b];
  });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t q = i; q < j; ++q) ranks[order[q]] = avg;
    i = j;
  }
  return ranks;
}

std::vector<double> TaskRankLabels(std::span<const double> losses) {
  for (double l : losses) Require(std::isfinite(l), ErrorKind::kNumerical, "task loss is not finite");
  return AverageRanks(losses, false);
}

const char* SyntheticFamilyName(SyntheticFamily f) {
  switch (f) {
    case SyntheticFamily::kUniform: return "uniform";
    case SyntheticFamily::kNormal: return "normal";
    case SyntheticFamily::kEvenlySpaced: return "evenly_spaced";
    case SyntheticFamily::kMixture: return "mixture";
  }
  return "?";
}

namespace {

std::vector<double> EvenlySpaced(std::size_t k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double lo = u(rng), hi = u(rng);
  if (lo > hi) std::swap(lo, hi);
  std::vector<double> v(k);
  for (std::size_t j = 0; j < k; ++j) v[j] = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(k - 1);
  std::shuffle(v.begin(), v.end(), rng);
  return v;
}

std::vector<double> DrawFamily(SyntheticFamily f, std::size_t k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(k);
  switch (f) {
    case SyntheticFamily::kUniform:
      for (double& x : v) x = u(rng);
      break;
    case SyntheticFamily::kNormal:
      for (double& x : v) x = g(rng);
      break;
    case SyntheticFamily::kEvenlySpaced: v = EvenlySpaced(k, rng); break;
    case SyntheticFamily::kMixture: {
      const std::vector<double> even = EvenlySpaced(k, rng);
      std::uniform_int_distribution<int> pick(0, 2);
      for (std::size_t j = 0; j < k; ++j) {
        switch (pick(rng)) {
          case 0: v[j] = u(rng); break;
          case 1: v[j] = g(rng); break;
          default: v[j] = even[j]; break;
        }
      }
      break;
    }
  }
  return v;
}

}  // namespace

std::vector<SyntheticRankSample> GenSynthetic(std::size_t n, std::size_t k, std::uint64_t seed,
                                              const SyntheticOptions& opts) {
  Require(n >= 1, ErrorKind::kContract, "synthetic set needs n >= 1");
  Require(k >= 2, ErrorKind::kContract, "synthetic set needs K >= 2");
  Require(opts.min_scale > 0.0 && opts.min_scale <= opts.max_scale, ErrorKind::kContract,
          "invalid synthetic softmax scale range");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> family(0, 3);
  std::uniform_real_distribution<double> log_scale(std::log(opts.min_scale), std::log(opts.max_scale));
  std::vector<SyntheticRankSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SyntheticRankSample s;
    s.family = static_cast<SyntheticFamily>(family(rng));
    const std::vector<double> raw = DrawFamily(s.family, k, rng);
    s.x = Softmax(raw, 1.0 / std::exp(log_scale(rng)));
    s.pi = AverageRanks(s.x, true);
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mapping module.

namespace {

constexpr double kInputFloor = 1e-6;

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::size_t LstmBlock(std::size_t h) { return 4 * h + 4 * h * h + 4 * h; }

}  // namespace

MappingModel::MappingModel(const MappingConfig& config, std::uint64_t seed) : config_(config) {
  Require(config.k >= 2, ErrorKind::kContract, "mapping module needs K >= 2");
  std::mt19937_64 rng(seed);
  const auto fill = [&](std::size_t begin, std::size_t count, double bound) {
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t i = begin; i < begin + count; ++i) params_[i] = u(rng);
  };
  const std::size_t k = config.k;
  if (config.arch == MappingArch::kBiLstm) {
    const std::size_t h = config.hidden;
    Require(h >= 1, ErrorKind::kContract, "mapping hidden size must be positive");
    params_.assign(2 * LstmBlock(h) + 2 * h + 1, 0.0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(h));
    for (std::size_t d = 0; d < 2; ++d) {
      const std::size_t off = d * LstmBlock(h);
      fill(off, LstmBlock(h), bound);
      for (std::size_t j = 0; j < h; ++j) params_[off + 4 * h + 4 * h * h + h + j] = 1.0;  // forget gate
    }
    fill(2 * LstmBlock(h), 2 * h, 1.0 / std::sqrt(static_cast<double>(2 * h)));
    params_.back() = 0.5 * static_cast<double>(k + 1);
  } else {
    const std::size_t f = config.ff_hidden;
    Require(f >= 1, ErrorKind::kContract, "mapping hidden size must be positive");
    params_.assign(f * k + f + f * f + f + k * f + k, 0.0);
    std::size_t off = 0;
    fill(off, f * k + f, 1.0 / std::sqrt(static_cast<double>(k)));
    off += f * k + f;
    fill(off, f * f + f, 1.0 / std::sqrt(static_cast<double>(f)));
    off += f * f + f;
    fill(off, k * f, 1.0 / std::sqrt(static_cast<double>(f)));
    for (std::size_t j = 0; j < k; ++j) params_[off + k * f + j] = 0.5 * static_cast<double>(k + 1);
  }
}

std::vector<std::pair<std::string, std::vector<std::size_t>>> MappingModel::TensorLayout() const {
  const std::size_t k = config_.k;
  if (config_.arch == MappingArch::kBiLstm) {
    const std::size_t h = config_.hidden;
    return {{"fwd.wx", {4 * h}}, {"fwd.wh", {4 * h, h}}, {"fwd.b", {4 * h}},
            {"bwd.wx", {4 * h}}, {"bwd.wh", {4 * h, h}}, {"bwd.b", {4 * h}},
            {"out.w", {2 * h}},  {"out.b", {1}}};
  }
  const std::size_t f = config_.ff_hidden;
  return {{"fc1.w", {f, k}}, {"fc1.b", {f}}, {"fc2.w", {f, f}}, {"fc2.b", {f}}, {"fc3.w", {k, f}}, {"fc3.b", {k}}};
}

void MappingModel::ForwardLstm(std::span<const double> u, bool reverse, std::size_t offset, std::vector<double>& hs,
                               std::vector<double>& cs, std::vector<double>& gates) const {
  const std::size_t k = u.size();
  const std::size_t h = config_.hidden;
  const double* wx = &params_[offset];
  const double* wh = wx + 4 * h;
  const double* b = wh + 4 * h * h;
  hs.assign(k * h, 0.0);
  cs.assign(k * h, 0.0);
  gates.assign(k * 4 * h, 0.0);
  std::vector<double> zero(h, 0.0);
  const double* h_prev = zero.data();
  const double* c_prev = zero.data();
  for (std::size_t s = 0; s < k; ++s) {
    const std::size_t p = reverse ? k - 1 - s : s;
    double* z = &gates[p * 4 * h];
    for (std::size_t g = 0; g < 4 * h; ++g) {
      double acc = b[g] + wx[g] * u[p];
      const double* row = wh + g * h;
      for (std::size_t j = 0; j < h; ++j) acc += row[j] * h_prev[j];
      z[g] = acc;
    }
    double* hp = &hs[p * h];
    double* cp = &cs[p * h];
    for (std::size_t j = 0; j < h; ++j) {
      const double ig = Sigmoid(z[j]);
      const double fg = Sigmoid(z[h + j]);
      const double gg = std::tanh(z[2 * h + j]);
      const double og = Sigmoid(z[3 * h + j]);
      z[j] = ig;
      z[h + j] = fg;
      z[2 * h + j] = gg;
      z[3 * h + j] = og;
      cp[j] = fg * c_prev[j] + ig * gg;
      hp[j] = og * std::tanh(cp[j]);
    }
    h_prev = hp;
    c_prev = cp;
  }
}

void MappingModel::BackwardLstm(std::span<const double> u, bool reverse, std::size_t offset,
                                const std::vector<double>& hs, const std::vector<double>& cs,
                                const std::vector<double>& gates, const std::vector<double>& dh_out,
                                std::vector<double>& du, std::vector<double>* dparams) const {
  const std::size_t k = u.size();
  const std::size_t h = config_.hidden;
  const double* wx = &params_[offset];
  const double* wh = wx + 4 * h;
  double* gwx = dparams ? &(*dparams)[offset] : nullptr;
  double* gwh = gwx ? gwx + 4 * h : nullptr;
  double* gb = gwh ? gwh + 4 * h * h : nullptr;
  std::vector<double> dh_next(h, 0.0), dc_next(h, 0.0), dz(4 * h), zero(h, 0.0);
  for (std::size_t step = k; step-- > 0;) {
    const std::size_t p = reverse ? k - 1 - step : step;
    const double* h_prev = zero.data();
    const double* c_prev = zero.data();
    if (step > 0) {
      const std::size_t pp = reverse ? k - step : step - 1;
      h_prev = &hs[pp * h];
      c_prev = &cs[pp * h];
    }
    const double* z = &gates[p * 4 * h];
    const double* cp = &cs[p * h];
    for (std::size_t j = 0; j < h; ++j) {
      const double ig = z[j], fg = z[h + j], gg = z[2 * h + j], og = z[3 * h + j];
      const double dh = dh_out[p * h + j] + dh_next[j];
      const double tc = std::tanh(cp[j]);
      const double dc = dc_next[j] + dh * og * (1.0 - tc * tc);
      dz[j] = dc * gg * ig * (1.0 - ig);
      dz[h + j] = dc * c_prev[j] * fg * (1.0 - fg);
      dz[2 * h + j] = dc * ig * (1.0 - gg * gg);
      dz[3 * h + j] = dh * tc * og * (1.0 - og);
      dc_next[j] = dc * fg;
    }
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    double dup = 0.0;
    for (std::size_t g = 0; g < 4 * h; ++g) {
      const double d = dz[g];
      dup += wx[g] * d;
      const double* row = wh + g * h;
      for (std::size_t j = 0; j < h; ++j) dh_next[j] += row[j] * d;
      if (gwx) {
        gwx[g] += d * u[p];
        gb[g] += d;
        double* grow = gwh + g * h;
        for (std::size_t j = 0; j < h; ++j) grow[j] += d * h_prev[j];
      }
    }
    du[p] += dup;
  }
}

std::vector<double> MappingModel::Forward(std::span<const double> x) const {
  const std::size_t k = config_.k;
  Require(!params_.empty(), ErrorKind::kNotInitialized, "mapping module has no parameters");
  Require(x.size() == k, ErrorKind::kDimension, "mapping input length must equal K");
  std::vector<double> u(k);
  for (std::size_t i = 0; i < k; ++i) u[i] = std::log(static_cast<double>(k) * x[i] + kInputFloor);
  std::vector<double> y(k);
  if (config_.arch == MappingArch::kBiLstm) {
    const std::size_t h = config_.hidden;
    std::vector<double> hf, cf, gf, hb, cb, gb;
    ForwardLstm(u, false, 0, hf, cf, gf);
    ForwardLstm(u, true, LstmBlock(h), hb, cb, gb);
    const double* v = &params_[2 * LstmBlock(h)];
    const double bout = params_.back();
    for (std::size_t p = 0; p < k; ++p) {
      double acc = bout;
      for (std::size_t j = 0; j < h; ++j) acc += v[j] * hf[p * h + j] + v[h + j] * hb[p * h + j];
      y[p] = acc;
    }
    return y;
  }
  const std::size_t f = config_.ff_hidden;
  const double* w1 = params_.data();
  const double* b1 = w1 + f * k;
  const double* w2 = b1 + f;
  const double* b2 = w2 + f * f;
  const double* w3 = b2 + f;
  const double* b3 = w3 + k * f;
  std::vector<double> a1(f), a2(f);
  for (std::size_t i = 0; i < f; ++i) {
    double acc = b1[i];
    for (std::size_t j = 0; j < k; ++j) acc += w1[i * k + j] * u[j];
    a1[i] = std::tanh(acc);
  }
  for (std::size_t i = 0; i < f; ++i) {
    double acc = b2[i];
    for (std::size_t j = 0; j < f; ++j) acc += w2[i * f + j] * a1[j];
    a2[i] = std::tanh(acc);
  }
  for (std::size_t i = 0; i < k; ++i) {
    double acc = b3[i];
    for (std::size_t j = 0; j < f; ++j) acc += w3[i * f + j] * a2[j];
    y[i] = acc;
  }
  return y;
}

void MappingModel::Backward(std::span<const double> x, std::span<const double> dy, std::vector<double>* dx,
                            std::vector<double>* dparams) const {
  const std::size_t k = config_.k;
  Require(x.size() == k && dy.size() == k, ErrorKind::kDimension, "mapping backward length must equal K");
  if (dparams) Require(dparams->size() == params_.size(), ErrorKind::kDimension, "gradient buffer size mismatch");
  std::vector<double> u(k);
  for (std::size_t i = 0; i < k; ++i) u[i] = std::log(static_cast<double>(k) * x[i] + kInputFloor);
  std::vector<double> du(k, 0.0);
  if (config_.arch == MappingArch::kBiLstm) {
    const std::size_t h = config_.hidden;
    std::vector<double> hf, cf, gf, hb, cb, gbw;
    ForwardLstm(u, false, 0, hf, cf, gf);
    ForwardLstm(u, true, LstmBlock(h), hb, cb, gbw);
    const std::size_t voff = 2 * LstmBlock(h);
    const double* v = &params_[voff];
    std::vector<double> dhf(k * h), dhb(k * h);
    for (std::size_t p = 0; p < k; ++p) {
      for (std::size_t j = 0; j < h; ++j) {
        dhf[p * h + j] = dy[p] * v[j];
        dhb[p * h + j] = dy[p] * v[h + j];
        if (dparams) {
          (*dparams)[voff + j] += dy[p] * hf[p * h + j];
          (*dparams)[voff + h + j] += dy[p] * hb[p * h + j];
        }
      }
      if (dparams) dparams->back() += dy[p];
    }
    BackwardLstm(u, false, 0, hf, cf, gf, dhf, du, dparams);
    BackwardLstm(u, true, LstmBlock(h), hb, cb, gbw, dhb, du, dparams);
  } else {
    const std::size_t f = config_.ff_hidden;
    const std::size_t o1 = 0, ob1 = f * k, o2 = ob1 + f, ob2 = o2 + f * f, o3 = ob2 + f, ob3 = o3 + k * f;
    const double* w1 = &params_[o1];
    const double* w2 = &params_[o2];
    const double* w3 = &params_[o3];
    std::vector<double> a1(f), a2(f);
    for (std::size_t i = 0; i < f; ++i) {
      double acc = params_[ob1 + i];
      for (std::size_t j = 0; j < k; ++j) acc += w1[i * k + j] * u[j];
      a1[i] = std::tanh(acc);
    }
    for (std::size_t i = 0; i < f; ++i) {
      double acc = params_[ob2 + i];
      for (std::size_t j = 0; j < f; ++j) acc += w2[i * f + j] * a1[j];
      a2[i] = std::tanh(acc);
    }
    std::vector<double> d2(f, 0.0), d1(f, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < f; ++j) {
        d2[j] += w3[i * f + j] * dy[i];
        if (dparams) (*dparams)[o3 + i * f + j] += dy[i] * a2[j];
      }
      if (dparams) (*dparams)[ob3 + i] += dy[i];
    }
    for (std::size_t i = 0; i < f; ++i) {
      const double dz = d2[i] * (1.0 - a2[i] * a2[i]);
      for (std::size_t j = 0; j < f; ++j) {
        d1[j] += w2[i * f + j] * dz;
        if (dparams) (*dparams)[o2 + i * f + j] += dz * a1[j];
      }
      if (dparams) (*dparams)[ob2 + i] += dz;
    }
    for (std::size_t i = 0; i < f; ++i) {
      const double dz = d1[i] * (1.0 - a1[i] * a1[i]);
      for (std::size_t j = 0; j < k; ++j) {
        du[j] += w1[i * k + j] * dz;
        if (dparams) (*dparams)[o1 + i * k + j] += dz * u[j];
      }
      if (dparams) (*dparams)[ob1 + i] += dz;
    }
  }
  if (dx) {
    dx->resize(k);
    for (std::size_t i = 0; i < k; ++i) (*dx)[i] = static_cast<double>(k) * du[i] / (static_cast<double>(k) * x[i] + kInputFloor);
  }
}

// ---------------------------------------------------------------------------
// Optimization helpers.

namespace {

class Adam {
 public:
  Adam(std::size_t n, double lr) : lr_(lr), m_(n, 0.0), v_(n, 0.0) {}

  void Step(std::span<double> params, std::span<const double> grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grad[i];
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad[i] * grad[i];
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + 1e-8);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  double lr_;
  std::size_t t_ = 0;
  std::vector<double> m_, v_;
};

double Sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

struct Split {
  std::vector<std::size_t> train, val;
};

Split MakeSplit(std::size_t n, double val_fraction) {
  Require(n >= 1, ErrorKind::kContract, "training set is empty");
  Require(val_fraction >= 0.0 && val_fraction < 1.0, ErrorKind::kContract, "val_fraction must be in [0, 1)");
  Split s;
  std::size_t n_val = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(n)));
  if (n < 2) n_val = 0;
  n_val = std::min(n_val, n - 1);
  for (std::size_t i = 0; i < n - n_val; ++i) s.train.push_back(i);
  for (std::size_t i = n - n_val; i < n; ++i) s.val.push_back(i);
  if (s.val.empty()) s.val = s.train;
  return s;
}

void CheckOptions(const TrainOptions& opts) {
  Require(opts.lr > 0.0, ErrorKind::kContract, "learning rate must be positive");
  Require(opts.epochs >= 1 && opts.batch >= 1, ErrorKind::kContract, "epochs and batch must be positive");
}

// Generic minibatch Adam loop with best-on-validation selection.
template <typename LossGrad, typename ValLoss>
void RunTraining(std::span<double> params, std::size_t n, const TrainOptions& opts, LossGrad loss_grad,
                 ValLoss val_loss, TrainReport* report) {
  CheckOptions(opts);
  const Split split = MakeSplit(n, opts.val_fraction);
  std::mt19937_64 rng(opts.seed);
  Adam adam(params.size(), opts.lr);
  std::vector<double> grad(params.size());
  std::vector<double> best(params.begin(), params.end());
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0, since_best = 0;
  std::vector<std::size_t> order = split.train;
  TrainReport local;
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opts.batch) {
      const std::size_t stop = std::min(order.size(), start + opts.batch);
      std::fill(grad.begin(), grad.end(), 0.0);
      const double scale = 1.0 / static_cast<double>(stop - start);
      for (std::size_t b = start; b < stop; ++b) total += loss_grad(order[b], scale, grad);
      for (double g : grad) Require(std::isfinite(g), ErrorKind::kTraining, "training diverged (non-finite gradient)");
      adam.Step(params, grad);
    }
    double val = 0.0;
    for (std::size_t i : split.val) val += val_loss(i);
    val /= static_cast<double>(split.val.size());
    Require(std::isfinite(val) && std::isfinite(total), ErrorKind::kTraining, "training diverged (loss is NaN)");
    local.train_loss.push_back(total / static_cast<double>(order.size()));
    local.val_loss.push_back(val);
    if (val < best_val) {
      best_val = val;
      best_epoch = epoch;
      since_best = 0;
      std::copy(params.begin(), params.end(), best.begin());
    } else if (++since_best >= opts.patience) {
      break;
    }
  }
  std::copy(best.begin(), best.end(), params.begin());
  local.best_epoch = best_epoch;
  local.best_val = best_val;
  if (report) *report = std::move(local);
}

double MeanAbsDiff(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

}  // namespace

MappingModel TrainMapping(std::span<const SyntheticRankSample> samples, const MappingConfig& config,
                          const TrainOptions& opts, TrainReport* report) {
  Require(!samples.empty(), ErrorKind::kContract, "mapping training set is empty");
  for (const auto& s : samples)
    Require(s.x.size() == config.k && s.pi.size() == config.k, ErrorKind::kDimension,
            "synthetic sample length must equal K");
  MappingModel m(config, opts.seed ^ 0x6d617070ULL);
  const double inv_k = 1.0 / static_cast<double>(config.k);
  std::vector<double> dy(config.k);
  auto loss_grad = [&](std::size_t i, double scale, std::vector<double>& grad) {
    const auto& s = samples[i];
    const std::vector<double> y = m.Forward(s.x);
    for (std::size_t j = 0; j < config.k; ++j) dy[j] = Sign(y[j] - s.pi[j]) * inv_k * scale;
    m.Backward(s.x, dy, nullptr, &grad);
    return MeanAbsDiff(y, s.pi);
  };
  auto val_loss = [&](std::size_t i) { return MeanAbsDiff(m.Forward(samples[i].x), samples[i].pi); };
  RunTraining(m.params(), samples.size(), opts, loss_grad, val_loss, report);
  return m;
}

std::vector<double> MapRanks(const MappingModel& m, std::span<const double> w) {
  Require(w.size() == m.k(), ErrorKind::kDimension, "weight vector length must equal the mapping K");
  return m.Forward(w);
}

namespace {

double Pearson(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

double SpearmanRho(std::span<const double> a, std::span<const double> b) {
  Require(a.size() == b.size() && a.size() >= 2, ErrorKind::kDimension, "spearman needs equal lengths >= 2");
  return Pearson(AverageRanks(a, false), AverageRanks(b, false));
}

double KendallTau(std::span<const double> a, std::span<const double> b) {
  Require(a.size() == b.size() && a.size() >= 2, ErrorKind::kDimension, "kendall needs equal lengths >= 2");
  double conc = 0.0, disc = 0.0, ties_a = 0.0, ties_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const double da = Sign(a[i] - a[j]);
      const double db = Sign(b[i] - b[j]);
      if (da == 0.0 && db == 0.0) continue;
      if (da == 0.0) {
        ties_a += 1.0;
      } else if (db == 0.0) {
        ties_b += 1.0;
      } else if (da == db) {
        conc += 1.0;
      } else {
        disc += 1.0;
      }
    }
  }
  const double denom = std::sqrt((conc + disc + ties_a) * (conc + disc + ties_b));
  return denom == 0.0 ? 0.0 : (conc - disc) / denom;
}

MappingEval EvaluateMapping(const MappingModel& m, std::span<const SyntheticRankSample> samples) {
  Require(!samples.empty(), ErrorKind::kContract, "evaluation set is empty");
  MappingEval e;
  for (const auto& s : samples) {
    const std::vector<double> y = MapRanks(m, s.x);
    e.mean_l1 += MeanAbsDiff(y, s.pi);
    e.mean_spearman += SpearmanRho(y, s.pi);
  }
  e.mean_l1 /= static_cast<double>(samples.size());
  e.mean_spearman /= static_cast<double>(samples.size());
  return e;
}

// ---------------------------------------------------------------------------
// Ranking module.

RankingModel::RankingModel(std::vector<double> weight, double bias) : weight_(std::move(weight)), bias_(bias) {
  for (double w : weight_) Require(std::isfinite(w), ErrorKind::kNumerical, "ranking weight is not finite");
  Require(std::isfinite(bias_), ErrorKind::kNumerical, "ranking bias is not finite");
}

double RankingModel::Score(const FeatureVector& z) const {
  Require(z.dim() == weight_.size(), ErrorKind::kDimension, "ranking input dimension mismatch");
  double s = bias_;
  for (std::size_t i = 0; i < weight_.size(); ++i) s += weight_[i] * z.values[i];
  return s;
}

std::vector<double> RankingModel::Scores(std::span<const FeatureVector> feats) const {
  std::vector<double> s;
  s.reserve(feats.size());
  for (const FeatureVector& z : feats) s.push_back(Score(z));
  return s;
}

std::vector<double> Reliability(const RankingModel& r, std::span<const FeatureVector> feats) {
  Require(!feats.empty(), ErrorKind::kContract, "reliability needs K >= 1 branches");
  return Softmax(r.Scores(feats));
}

double RankingLossAndGrad(const RankingModel& r, const MappingModel& m, std::span<const FeatureVector> feats,
                          std::span<const double> label, std::vector<double>* grad) {
  const std::size_t k = feats.size();
  Require(k >= 2, ErrorKind::kContract, "ranking needs K >= 2 branches");
  Require(k == m.k() && label.size() == k, ErrorKind::kDimension, "branch count must match mapping K and label");
  const std::vector<double> w = Reliability(r, feats);
  const std::vector<double> y = m.Forward(w);
  const double inv_k = 1.0 / static_cast<double>(k);
  const double loss = MeanAbsDiff(y, label);
  if (!grad) return loss;
  std::vector<double> dy(k), dw;
  for (std::size_t j = 0; j < k; ++j) dy[j] = Sign(y[j] - label[j]) * inv_k;
  m.Backward(w, dy, &dw, nullptr);
  double mean = 0.0;
  for (std::size_t j = 0; j < k; ++j) mean += w[j] * dw[j];
  const std::size_t d = r.dim();
  grad->assign(d + 1, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    const double ds = w[j] * (dw[j] - mean);
    for (std::size_t i = 0; i < d; ++i) (*grad)[i] += ds * feats[j].values[i];
    (*grad)[d] += ds;
  }
  return loss;
}

namespace {

std::size_t CheckRankingData(const RankingData& data) {
  Require(!data.feats.empty(), ErrorKind::kContract, "ranking training set is empty");
  Require(data.feats.size() == data.labels.size(), ErrorKind::kDimension, "features and labels differ in count");
  const std::size_t k = data.feats.front().size();
  Require(k >= 2, ErrorKind::kContract, "ranking needs K >= 2 branches");
  const std::size_t d = data.feats.front().front().dim();
  for (std::size_t i = 0; i < data.feats.size(); ++i) {
    Require(data.feats[i].size() == k && data.labels[i].size() == k, ErrorKind::kDimension,
            "sample " + std::to_string(i) + " does not have exactly K branches");
    for (const FeatureVector& z : data.feats[i])
      Require(z.dim() == d, ErrorKind::kDimension, "sample " + std::to_string(i) + " has a feature size mismatch");
    for (double l : data.labels[i]) Require(std::isfinite(l), ErrorKind::kNumerical, "label is not finite");
  }
  return d;
}

}  // namespace

RankingModel TrainRanking(const RankingData& data, const MappingModel& m, const TrainOptions& opts,
                          TrainReport* report) {
  const std::size_t d = CheckRankingData(data);
  Require(data.feats.front().size() == m.k(), ErrorKind::kDimension, "branch count must equal the mapping K");
  std::vector<double> params(d + 1, 0.0);
  std::vector<double> g;
  const auto model_of = [&](std::span<const double> p) {
    return RankingModel(std::vector<double>(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(d)), p[d]);
  };
  auto loss_grad = [&](std::size_t i, double scale, std::vector<double>& grad) {
    const double loss = RankingLossAndGrad(model_of(params), m, data.feats[i], data.labels[i], &g);
    for (std::size_t j = 0; j <= d; ++j) grad[j] += scale * g[j];
    return loss;
  };
  auto val_loss = [&](std::size_t i) {
    return RankingLossAndGrad(model_of(params), m, data.feats[i], data.labels[i], nullptr);
  };
  RunTraining(params, data.feats.size(), opts, loss_grad, val_loss, report);
  return model_of(params);
}

RankingModel TrainLossRegressor(const RankingData& data, const TrainOptions& opts, TrainReport* report) {
  const std::size_t d = CheckRankingData(data);
  const std::size_t k = data.feats.front().size();
  std::vector<double> params(d + 1, 0.0);
  double mean = 0.0;
  for (const auto& l : data.labels) mean += std::accumulate(l.begin(), l.end(), 0.0);
  params[d] = mean / static_cast<double>(data.labels.size() * k);
  const double inv_k = 1.0 / static_cast<double>(k);
  const auto predict = [&](const FeatureVector& z) {
    double s = params[d];
    for (std::size_t j = 0; j < d; ++j) s += params[j] * z.values[j];
    return s;
  };
  auto loss_grad = [&](std::size_t i, double scale, std::vector<double>& grad) {
    double loss = 0.0;
    for (std::size_t b = 0; b < k; ++b) {
      const FeatureVector& z = data.feats[i][b];
      const double e = predict(z) - data.labels[i][b];
      loss += std::abs(e) * inv_k;
      const double ds = Sign(e) * inv_k * scale;
      for (std::size_t j = 0; j < d; ++j) grad[j] += ds * z.values[j];
      grad[d] += ds;
    }
    return loss;
  };
  auto val_loss = [&](std::size_t i) {
    double loss = 0.0;
    for (std::size_t b = 0; b < k; ++b) loss += std::abs(predict(data.feats[i][b]) - data.labels[i][b]) * inv_k;
    return loss;
  };
  RunTraining(params, data.feats.size(), opts, loss_grad, val_loss, report);
  return RankingModel(std::vector<double>(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(d)), params[d]);
}

const char* RankVariantName(RankVariant v) {
  switch (v) {
    case RankVariant::kFull: return "full";
    case RankVariant::kInverseLoss: return "inverse-loss";
    case RankVariant::kInverseRank: return "inverse-rank";
  }
  return "?";
}

RankVariant ParseRankVariant(const std::string& name) {
  for (RankVariant v : {RankVariant::kFull, RankVariant::kInverseLoss, RankVariant::kInverseRank})
    if (name == RankVariantName(v)) return v;
  Fail(ErrorKind::kConfig, "unknown rank variant '" + name + "'");
}

std::vector<double> UniformWeights(std::size_t k) {
  Require(k >= 1, ErrorKind::kContract, "uniform weights need K >= 1");
  return std::vector<double>(k, 1.0 / static_cast<double>(k));
}

std::vector<double> RankHead::ReliabilityScores(std::span<const FeatureVector> feats) const {
  Require(!feats.empty(), ErrorKind::kContract, "reliability needs K >= 1 branches");
  std::vector<double> s = ranking.Scores(feats);
  if (variant == RankVariant::kFull) return s;
  for (double& v : s) v = 1.0 / std::max(v, 1e-6);
  if (variant == RankVariant::kInverseLoss) return s;
  const std::vector<double> ranks = AverageRanks(s, true);
  const double k1 = static_cast<double>(s.size() + 1);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = k1 - ranks[i];
  return s;
}

std::vector<double> RankHead::Weights(std::span<const FeatureVector> feats) const {
  if (variant == RankVariant::kFull) return Reliability(ranking, feats);
  std::vector<double> s = ReliabilityScores(feats);
  const double sum = std::accumulate(s.begin(), s.end(), 0.0);
  for (double& v : s) v /= sum;
  return s;
}

// ---------------------------------------------------------------------------
// Serialization.

namespace {

const char* ArchName(MappingArch a) { return a == MappingArch::kBiLstm ? "bilstm" : "feedforward"; }

MappingArch ParseArch(const std::string& s) {
  if (s == "bilstm") return MappingArch::kBiLstm;
  if (s == "feedforward") return MappingArch::kFeedForward;
  Fail(ErrorKind::kLoad, "unknown mapping architecture '" + s + "'");
}

}  // namespace

Container RankHeadToContainer(const RankHead& h) {
  Container c;
  c.manifest = {{"format", "bft-rank"}, {"variant", RankVariantName(h.variant)}};
  if (h.mapping.num_params() > 0) {
    const MappingConfig& mc = h.mapping.config();
    c.manifest["mapping"] = {{"arch", ArchName(mc.arch)}, {"k", mc.k}, {"hidden", mc.hidden}, {"ff_hidden", mc.ff_hidden}};
    std::size_t off = 0;
    for (const auto& [name, shape] : h.mapping.TensorLayout()) {
      std::size_t n = 1;
      for (std::size_t s : shape) n *= s;
      const auto p = h.mapping.params().subspan(off, n);
      c.tensors["mapping." + name] = Tensor{DType::kF64, shape, std::vector<double>(p.begin(), p.end())};
      off += n;
    }
  }
  c.manifest["ranking"] = {{"dim", h.ranking.dim()}};
  c.tensors["ranking.weight"] = Tensor{DType::kF64, {h.ranking.dim()}, h.ranking.weight()};
  c.tensors["ranking.bias"] = Tensor{DType::kF64, {1}, {h.ranking.bias()}};
  return c;
}

RankHead RankHeadFromContainer(const Container& c) {
  try {
    Require(c.manifest.value("format", "") == "bft-rank", ErrorKind::kLoad, "container is not a bft-rank head");
    RankHead h;
    h.variant = ParseRankVariant(c.manifest.at("variant").get<std::string>());
    if (c.manifest.contains("mapping")) {
      const auto& jm = c.manifest.at("mapping");
      MappingConfig mc;
      mc.arch = ParseArch(jm.at("arch").get<std::string>());
      mc.k = jm.at("k");
      mc.hidden = jm.at("hidden");
      mc.ff_hidden = jm.at("ff_hidden");
      h.mapping = MappingModel(mc, 0);
      std::size_t off = 0;
      for (const auto& [name, shape] : h.mapping.TensorLayout()) {
        const Tensor& t = c.at("mapping." + name);
        Require(t.shape == shape, ErrorKind::kLoad, "tensor 'mapping." + name + "' has the wrong shape");
        for (double v : t.values) {
          Require(std::isfinite(v), ErrorKind::kLoad, "tensor 'mapping." + name + "' is not finite");
          h.mapping.params()[off++] = v;
        }
      }
    } else {
      Require(h.variant != RankVariant::kFull, ErrorKind::kLoad, "full rank head requires a mapping section");
    }
    const std::size_t d = c.manifest.at("ranking").at("dim");
    const Tensor& w = c.at("ranking.weight");
    Require(w.values.size() == d, ErrorKind::kLoad, "tensor 'ranking.weight' has the wrong shape");
    h.ranking = RankingModel(w.values, c.at("ranking.bias").values.at(0));
    return h;
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kLoad, std::string("malformed rank-head manifest: ") + e.what());
  }
}

void SaveRankHeadFile(const std::filesystem::path& path, const RankHead& h) {
  WriteContainerFile(path, RankHeadToContainer(h));
}

RankHead LoadRankHeadFile(const std::filesystem::path& path) { return RankHeadFromContainer(ReadContainerFile(path)); }

}  // namespace bft

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

#include "bft/harness.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "bft/aggregate.hpp"
#include "bft/error.hpp"

namespace bft {
namespace {

constexpr int kReportVersion = 1;

using Clock = std::chrono::steady_clock;

double MsSince(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::filesystem::path Resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.empty() || path.is_absolute() || base.empty()) return path;
  return base / path;
}

std::vector<double> Losses(Task task, const std::vector<Prediction>& preds, double label) {
  std::vector<double> out;
  out.reserve(preds.size());
  for (const Prediction& p : preds) out.push_back(BranchLoss(task, p, label));
  return out;
}

}  // namespace

const char* ModeName(Mode m) {
  switch (m) {
    case Mode::kBftA: return "bft-a";
    case Mode::kBftD: return "bft-d";
    case Mode::kBaseline: return "baseline";
    case Mode::kAugMean: return "aug-mean";
    case Mode::kMcDropout: return "mc-dropout";
    case Mode::kAblationV1: return "ablation-v1";
    case Mode::kAblationV2: return "ablation-v2";
  }
  return "?";
}

Mode ParseMode(const std::string& name) {
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  for (Mode m : {Mode::kBftA, Mode::kBftD, Mode::kBaseline, Mode::kAugMean, Mode::kMcDropout, Mode::kAblationV1,
                 Mode::kAblationV2})
    if (lower == ModeName(m)) return m;
  Fail(ErrorKind::kConfig, "unknown mode '" + name + "'");
}

bool UsesBank(Mode m) {
  return m == Mode::kBftA || m == Mode::kAugMean || m == Mode::kAblationV1 || m == Mode::kAblationV2;
}

bool UsesMasks(Mode m) { return m == Mode::kBftD || m == Mode::kMcDropout; }

bool UsesRankHead(Mode m) {
  return m == Mode::kBftA || m == Mode::kBftD || m == Mode::kAblationV1 || m == Mode::kAblationV2;
}

const char* NoiseKindName(NoiseKind k) {
  switch (k) {
    case NoiseKind::kNone: return "none";
    case NoiseKind::kTemporal: return "temporal";
    case NoiseKind::kSpatial: return "spatial";
  }
  return "?";
}

NoiseKind ParseNoiseKind(const std::string& name) {
  for (NoiseKind k : {NoiseKind::kNone, NoiseKind::kTemporal, NoiseKind::kSpatial})
    if (name == NoiseKindName(k)) return k;
  Fail(ErrorKind::kConfig, "unknown noise kind '" + name + "'");
}

void NoiseSpec::Validate(double duration_s) const {
  Require(std::isfinite(ratio) && ratio >= 0.0, ErrorKind::kConfig, "noise ratio must be ≥ 0");
  if (kind != NoiseKind::kTemporal) return;
  Require(window_s.first >= 0.0 && window_s.first < window_s.second && window_s.second <= duration_s,
          ErrorKind::kRange, "noise window outside the trial");
}

Trial InjectNoise(const Trial& trial, const NoiseSpec& spec) {
  spec.Validate(trial.duration_s());
  if (spec.kind == NoiseKind::kNone || spec.ratio == 0.0) return trial;
  Trial out = trial;
  std::mt19937_64 rng(spec.seed);
  if (spec.kind == NoiseKind::kTemporal) {
    const std::size_t first = SecondsToSamples(spec.window_s.first, trial.rate_hz());
    const std::size_t last = std::min(SecondsToSamples(spec.window_s.second, trial.rate_hz()), trial.samples());
    AddProportionalNoise(out, spec.ratio, rng, first, last);
    return out;
  }
  const std::size_t c = std::uniform_int_distribution<std::size_t>(0, trial.channels() - 1)(rng);
  auto x = out.channel(c);
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(x.size()));
  std::normal_distribution<double> noise(0.0, 1.0);
  for (double& v : x) v += spec.ratio * sd * noise(rng);
  return out;
}

std::uint64_t TrialNoiseSeed(std::uint64_t seed, std::size_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

BankConfig BankConfigFromJson(const nlohmann::json& j) {
  BankConfig b;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "kinds") b.kinds = value.get<std::vector<std::string>>();
      else if (key == "scales") b.scales = value.get<std::vector<double>>();
      else if (key == "noise_ratio") b.noise_ratio = value;
      else if (key == "noise_seed") b.noise_seed = value;
      else if (key == "freq_shifts_hz") b.freq_shifts_hz = value.get<std::vector<double>>();
      else if (key == "slide_starts_s") b.slide_starts_s = value.get<std::vector<double>>();
      else Fail(ErrorKind::kConfig, "unknown bank key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kConfig, std::string("malformed bank block: ") + e.what());
  }
  for (const std::string& k : b.kinds) ParseTransformKind(k);
  return b;
}

nlohmann::json BankConfigToJson(const BankConfig& b) {
  return {{"kinds", b.kinds},           {"scales", b.scales},
          {"noise_ratio", b.noise_ratio}, {"noise_seed", b.noise_seed},
          {"freq_shifts_hz", b.freq_shifts_hz}, {"slide_starts_s", b.slide_starts_s}};
}

void StreamConfig::Validate() const {
  Require(std::isfinite(tau) && tau > 0.0, ErrorKind::kConfig, "tau must be > 0");
  if (UsesMasks(mode)) Require(masks >= 2, ErrorKind::kConfig, "dropout modes need masks.k ≥ 2");
  if (UsesBank(mode)) {
    const std::vector<TransformSpec> b = BuildBank(bank);
    Require(!b.empty(), ErrorKind::kConfig, "empty transform bank");
  }
  Require(!(bn_adapt && quantized), ErrorKind::kConfig, "bn_adapt cannot run on the quantized path");
  if (bn_adapt) {
    Require(bn_window >= 1, ErrorKind::kConfig, "bn_adapt.window must be ≥ 1");
    Require(bn_momentum > 0.0 && bn_momentum <= 1.0, ErrorKind::kConfig, "bn_adapt.momentum must be in (0, 1]");
  }
  if (ea_eps) Require(*ea_eps >= 0.0, ErrorKind::kConfig, "ea.eps must be ≥ 0");
  Require(ndcg_k >= 1, ErrorKind::kConfig, "ndcg_k must be ≥ 1");
  Require(std::isfinite(noise.ratio) && noise.ratio >= 0.0, ErrorKind::kConfig, "noise.ratio must be ≥ 0");
  Require(noise.window_s.first < noise.window_s.second, ErrorKind::kConfig, "noise window must be increasing");
}

nlohmann::json StreamConfig::ToJson() const {
  nlohmann::json j;
  j["mode"] = ModeName(mode);
  j["task"] = TaskName(task);
  j["model"] = model_path.string();
  j["rank_head"] = rank_head_path.string();
  j["stream"] = stream_path.string();
  j["output"] = {{"report", report_path.string()}, {"csv", csv_path.string()}};
  j["tau"] = tau;
  j["bank"] = BankConfigToJson(bank);
  j["masks"] = {{"k", masks}, {"strided", strided_masks}};
  j["ea"] = {{"enabled", ea},
             {"update_order", ea_order == EaUpdateOrder::kUpdateThenAlign ? "update-then-align" : "align-then-update"},
             {"eps", ea_eps ? nlohmann::json(*ea_eps) : nlohmann::json(nullptr)}};
  j["bn_adapt"] = {{"enabled", bn_adapt}, {"window", bn_window}, {"momentum", bn_momentum}};
  j["quantized"] = {{"enabled", quantized}, {"model", quant_model_path.string()}};
  j["noise"] = {{"kind", NoiseKindName(noise.kind)},
                {"window_s", {noise.window_s.first, noise.window_s.second}},
                {"ratio", noise.ratio},
                {"seed", noise.seed}};
  j["force_uniform_weights"] = force_uniform_weights;
  j["ndcg_k"] = ndcg_k;
  j["seed"] = seed;
  return j;
}

StreamConfig StreamConfig::FromJson(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  StreamConfig c;
  auto block = [](const nlohmann::json& v, const char* name) -> const nlohmann::json& {
    if (!v.is_object()) Fail(ErrorKind::kConfig, std::string(name) + " must be an object");
    return v;
  };
  try {
    if (!j.is_object()) Fail(ErrorKind::kConfig, "config must be an object");
    for (const auto& [key, value] : j.items()) {
      if (key == "mode") c.mode = ParseMode(value.get<std::string>());
      else if (key == "task") c.task = ParseTask(value.get<std::string>());
      else if (key == "model") c.model_path = Resolve(base_dir, value.get<std::string>());
      else if (key == "rank_head") c.rank_head_path = Resolve(base_dir, value.get<std::string>());
      else if (key == "stream") c.stream_path = Resolve(base_dir, value.get<std::string>());
      else if (key == "output") {
        for (const auto& [k, v] : block(value, "output").items()) {
          if (k == "report") c.report_path = Resolve(base_dir, v.get<std::string>());
          else if (k == "csv") c.csv_path = Resolve(base_dir, v.get<std::string>());
          else Fail(ErrorKind::kConfig, "unknown output key '" + k + "'");
        }
      } else if (key == "tau") c.tau = value;
      else if (key == "bank") c.bank = BankConfigFromJson(block(value, "bank"));
      else if (key == "masks") {
        for (const auto& [k, v] : block(value, "masks").items()) {
          if (k == "k") c.masks = v;
          else if (k == "strided") c.strided_masks = v;
          else Fail(ErrorKind::kConfig, "unknown masks key '" + k + "'");
        }
      } else if (key == "ea") {
        for (const auto& [k, v] : block(value, "ea").items()) {
          if (k == "enabled") c.ea = v;
          else if (k == "update_order") {
            const std::string o = v.get<std::string>();
            if (o == "update-then-align") c.ea_order = EaUpdateOrder::kUpdateThenAlign;
            else if (o == "align-then-update") c.ea_order = EaUpdateOrder::kAlignThenUpdate;
            else Fail(ErrorKind::kConfig, "unknown ea.update_order '" + o + "'");
          } else if (k == "eps") {
            if (v.is_null()) c.ea_eps.reset();
            else c.ea_eps = v.get<double>();
          } else Fail(ErrorKind::kConfig, "unknown ea key '" + k + "'");
        }
      } else if (key == "bn_adapt") {
        for (const auto& [k, v] : block(value, "bn_adapt").items()) {
          if (k == "enabled") c.bn_adapt = v;
          else if (k == "window") c.bn_window = v;
          else if (k == "momentum") c.bn_momentum = v;
          else Fail(ErrorKind::kConfig, "unknown bn_adapt key '" + k + "'");
        }
      } else if (key == "quantized") {
        for (const auto& [k, v] : block(value, "quantized").items()) {
          if (k == "enabled") c.quantized = v;
          else if (k == "model") c.quant_model_path = Resolve(base_dir, v.get<std::string>());
          else Fail(ErrorKind::kConfig, "unknown quantized key '" + k + "'");
        }
      } else if (key == "noise") {
        for (const auto& [k, v] : block(value, "noise").items()) {
          if (k == "kind") c.noise.kind = ParseNoiseKind(v.get<std::string>());
          else if (k == "window_s") c.noise.window_s = {v.at(0), v.at(1)};
          else if (k == "ratio") c.noise.ratio = v;
          else if (k == "seed") c.noise.seed = v;
          else Fail(ErrorKind::kConfig, "unknown noise key '" + k + "'");
        }
      } else if (key == "force_uniform_weights") c.force_uniform_weights = value;
      else if (key == "ndcg_k") c.ndcg_k = value;
      else if (key == "seed") c.seed = value;
      else Fail(ErrorKind::kConfig, "unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kConfig, std::string("malformed config: ") + e.what());
  }
  c.Validate();
  return c;
}

StreamConfig StreamConfig::Load(const std::filesystem::path& path) {
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

double Accuracy(std::span<const double> preds, std::span<const double> labels) {
  Require(preds.size() == labels.size(), ErrorKind::kDimension, "accuracy: length mismatch");
  Require(!preds.empty(), ErrorKind::kDegenerateInput, "accuracy of an empty series");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hit += preds[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(preds.size());
}

std::optional<double> PearsonCc(std::span<const double> a, std::span<const double> b) {
  Require(a.size() == b.size(), ErrorKind::kDimension, "correlation: length mismatch");
  Require(a.size() >= 2, ErrorKind::kDegenerateInput, "correlation needs two points");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

double Rmse(std::span<const double> preds, std::span<const double> labels) {
  Require(preds.size() == labels.size(), ErrorKind::kDimension, "rmse: length mismatch");
  Require(!preds.empty(), ErrorKind::kDegenerateInput, "rmse of an empty series");
  double s = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) s += (preds[i] - labels[i]) * (preds[i] - labels[i]);
  return std::sqrt(s / static_cast<double>(preds.size()));
}

double NdcgAtK(std::span<const double> scores, std::span<const double> losses, std::size_t k) {
  Require(scores.size() == losses.size(), ErrorKind::kDimension, "ndcg: length mismatch");
  Require(!scores.empty() && k >= 1, ErrorKind::kDegenerateInput, "ndcg needs items and k ≥ 1");
  const std::size_t n = scores.size();
  const std::vector<double> rank = TaskRankLabels(losses);
  std::vector<double> rel(n);
  for (std::size_t i = 0; i < n; ++i) rel[i] = static_cast<double>(n) - rank[i] + 1.0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<double> ideal = rel;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const std::size_t top = std::min(k, n);
  double dcg = 0.0, idcg = 0.0;
  for (std::size_t i = 0; i < top; ++i) {
    const double disc = std::log2(static_cast<double>(i) + 2.0);
    dcg += rel[order[i]] / disc;
    idcg += ideal[i] / disc;
  }
  return dcg / idcg;
}

Metrics ComputeMetrics(Task task, std::span<const TrialRecord> trials) {
  Metrics m;
  m.n = trials.size();
  if (trials.empty()) return m;
  std::vector<double> preds, labels, ndcg;
  for (const TrialRecord& t : trials) {
    Require(std::isfinite(t.label), ErrorKind::kData, "trial " + std::to_string(t.index) + ": non-finite label");
    preds.push_back(t.prediction);
    labels.push_back(t.label);
    if (t.ndcg) ndcg.push_back(*t.ndcg);
  }
  if (task == Task::kClassification) {
    m.accuracy = Accuracy(preds, labels);
  } else {
    m.rmse = Rmse(preds, labels);
    if (preds.size() >= 2) m.cc = PearsonCc(preds, labels);
    m.cc_defined = m.cc.has_value();
  }
  if (!ndcg.empty()) {
    m.ndcg_mean = std::accumulate(ndcg.begin(), ndcg.end(), 0.0) / static_cast<double>(ndcg.size());
    std::vector<double> s = ndcg;
    std::sort(s.begin(), s.end());
    const std::size_t h = s.size() / 2;
    m.ndcg_median = s.size() % 2 == 1 ? s[h] : 0.5 * (s[h - 1] + s[h]);
  }
  return m;
}

double BranchLoss(Task task, const Prediction& p, double label) {
  if (task == Task::kRegression) {
    const double e = p.scalar() - label;
    return e * e;
  }
  const std::size_t c = static_cast<std::size_t>(label);
  Require(label >= 0.0 && c < p.size() && static_cast<double>(c) == label, ErrorKind::kData,
          "class label outside the model's classes");
  const double mx = *std::max_element(p.values.begin(), p.values.end());
  double z = 0.0;
  for (double v : p.values) z += std::exp(v - mx);
  return std::log(z) + mx - p.values[c];
}

EvalReport RunStream(const StreamConfig& cfg, const StreamInputs& in, const Stream& stream) {
  cfg.Validate();
  Require(in.model != nullptr, ErrorKind::kContract, "run_stream needs a model");
  const ModelBundle& base = *in.model;
  Require(stream.task == cfg.task, ErrorKind::kConfig,
          std::string("stream task '") + TaskName(stream.task) + "' differs from config task '" + TaskName(cfg.task) + "'");
  const HeadKind want = cfg.task == Task::kClassification ? HeadKind::kClassifier : HeadKind::kRegressor;
  Require(base.head_kind() == want, ErrorKind::kConfig, "model head does not match the configured task");
  if (cfg.quantized) {
    Require(in.quant != nullptr, ErrorKind::kConfig, "quantized run without a quantized model");
    Require(in.quant->input_channels() == base.input_channels() && in.quant->input_samples() == base.input_samples() &&
                in.quant->feature_dim() == base.feature_dim(),
            ErrorKind::kConfig, "quantized model does not match the float model");
  }
  const bool ranked = UsesRankHead(cfg.mode) && !cfg.force_uniform_weights;
  if (ranked) {
    Require(in.head != nullptr, ErrorKind::kConfig, std::string("mode ") + ModeName(cfg.mode) + " needs a rank head");
    const RankVariant need = cfg.mode == Mode::kAblationV1   ? RankVariant::kInverseLoss
                             : cfg.mode == Mode::kAblationV2 ? RankVariant::kInverseRank
                                                             : RankVariant::kFull;
    Require(in.head->variant == need, ErrorKind::kConfig,
            std::string("mode ") + ModeName(cfg.mode) + " needs a '" + RankVariantName(need) + "' rank head, got '" +
                RankVariantName(in.head->variant) + "'");
    Require(in.head->ranking.dim() == base.feature_dim(), ErrorKind::kConfig,
            "rank head feature dimension differs from the model's");
  }
  const double tau = (cfg.mode == Mode::kAugMean || cfg.mode == Mode::kMcDropout) ? 1.0 : cfg.tau;

  std::vector<TransformSpec> bank;
  if (UsesBank(cfg.mode)) bank = BuildBank(cfg.bank);
  else if (cfg.mode == Mode::kBaseline) bank = {TransformSpec::Identity()};
  std::vector<DropoutMask> masks;
  if (UsesMasks(cfg.mode)) masks = BuildMasks(cfg.masks, base.feature_dim(), cfg.strided_masks);
  const std::size_t k = UsesMasks(cfg.mode) ? masks.size() : bank.size();
  if (ranked && in.head->variant == RankVariant::kFull)
    Require(in.head->mapping.k() == k, ErrorKind::kConfig,
            "rank head was trained for " + std::to_string(in.head->mapping.k()) + " branches, run has " +
                std::to_string(k));

  EvalReport report;
  report.config = cfg;
  report.branches = k;
  EaState ea(cfg.ea_eps);
  ModelBundle adapted = base;
  std::deque<Trial> window;
  const std::size_t samples = base.input_samples();

  for (std::size_t i = 0; i < stream.size(); ++i) {
    const std::string where = "trial " + std::to_string(i) + ": ";
    Trial x = stream.trials[i];
    if (x.channels() != base.input_channels())
      Fail(ErrorKind::kData, where + "has " + std::to_string(x.channels()) + " channels, model expects " +
                                 std::to_string(base.input_channels()));
    if (x.samples() < samples)
      Fail(ErrorKind::kData, where + "has " + std::to_string(x.samples()) + " samples, model needs " +
                                 std::to_string(samples));
    if (!x.AllFinite()) Fail(ErrorKind::kData, where + "non-finite samples");
    if (cfg.noise.kind != NoiseKind::kNone) {
      NoiseSpec ns = cfg.noise;
      ns.seed = TrialNoiseSeed(cfg.noise.seed, i);
      x = InjectNoise(x, ns);
    }
    TrialRecord rec;
    rec.index = i;
    rec.label = stream.labels[i];

    auto t0 = Clock::now();
    Trial aligned;
    if (!cfg.ea) {
      aligned = x;
    } else if (cfg.ea_order == EaUpdateOrder::kUpdateThenAlign || !ea.initialized()) {
      ea = ea.Updated(x);
      aligned = EaAlign(ea, x);
    } else {
      aligned = EaAlign(ea, x);
      ea = ea.Updated(x);
    }
    if (cfg.bn_adapt) {
      window.push_back(aligned.Slice(0, samples));
      if (window.size() > cfg.bn_window) window.pop_front();
      std::vector<Trial> batch(window.begin(), window.end());
      adapted = BnAdapt(adapted, batch, cfg.bn_momentum);
    }
    rec.latency.align_ms = MsSince(t0);

    const ModelBundle& model = adapted;
    auto features = [&](const Trial& t) { return cfg.quantized ? FeaturesQ(*in.quant, t) : Features(model, t); };
    auto head = [&](const FeatureVector& f) { return cfg.quantized ? HeadQ(*in.quant, f) : Head(model, f); };

    std::vector<FeatureVector> feats;
    std::vector<Prediction> preds;
    feats.reserve(k);
    preds.reserve(k);
    if (UsesMasks(cfg.mode)) {
      t0 = Clock::now();
      const Trial input = ApplyTransform(aligned, TransformSpec::Identity(), samples);
      rec.latency.transform_ms = MsSince(t0);
      t0 = Clock::now();
      const FeatureVector f = features(input);
      rec.latency.forward_ms = MsSince(t0);
      t0 = Clock::now();
      for (const DropoutMask& mk : masks) feats.push_back(ApplyMask(f, mk));
      rec.latency.transform_ms += MsSince(t0);
      t0 = Clock::now();
      for (const FeatureVector& fk : feats) preds.push_back(head(fk));
      rec.latency.forward_ms += MsSince(t0);
    } else {
      std::vector<Trial> branches;
      branches.reserve(k);
      t0 = Clock::now();
      for (const TransformSpec& spec : bank) {
        TransformSpec s = spec;
        if (s.kind == TransformKind::kNoise) s.seed = TrialNoiseSeed(spec.seed ^ cfg.seed, i);
        branches.push_back(ApplyTransform(aligned, s, samples));
      }
      rec.latency.transform_ms = MsSince(t0);
      t0 = Clock::now();
      for (const Trial& b : branches) {
        feats.push_back(features(b));
        preds.push_back(head(feats.back()));
      }
      rec.latency.forward_ms = MsSince(t0);
    }
    for (const Prediction& p : preds)
      for (double v : p.values)
        if (!std::isfinite(v)) Fail(ErrorKind::kNumerical, where + "non-finite branch prediction");

    t0 = Clock::now();
    std::vector<double> scores, weights;
    if (ranked) {
      scores = in.head->ReliabilityScores(feats);
      weights = in.head->Weights(feats);
    } else {
      weights = UniformWeights(k);
    }
    rec.latency.rank_ms = MsSince(t0);

    t0 = Clock::now();
    if (cfg.task == Task::kClassification) {
      std::vector<std::vector<double>> logits;
      logits.reserve(k);
      for (const Prediction& p : preds) logits.push_back(p.values);
      ClassifyResult r = Classify(logits, weights, tau);
      rec.prediction = static_cast<double>(r.label);
      rec.probs = std::move(r.probs);
      rec.weights = weights;
    } else {
      std::vector<double> values;
      values.reserve(k);
      for (const Prediction& p : preds) values.push_back(p.scalar());
      rec.prediction = ranked ? Regress(values, scores) : MeanPrediction(values);
      rec.weights = ranked ? scores : weights;
    }
    rec.latency.aggregate_ms = MsSince(t0);
    if (!std::isfinite(rec.prediction)) Fail(ErrorKind::kNumerical, where + "non-finite prediction");

    // Scoring only: the label is consulted after the prediction is fixed.
    rec.branch_losses = Losses(cfg.task, preds, rec.label);
    if (ranked) rec.ndcg = NdcgAtK(scores, rec.branch_losses, cfg.ndcg_k);
    report.trials.push_back(std::move(rec));
  }

  report.metrics = ComputeMetrics(cfg.task, report.trials);
  if (!report.trials.empty()) {
    Latency& m = report.mean_latency;
    for (const TrialRecord& t : report.trials) {
      m.align_ms += t.latency.align_ms;
      m.transform_ms += t.latency.transform_ms;
      m.forward_ms += t.latency.forward_ms;
      m.rank_ms += t.latency.rank_ms;
      m.aggregate_ms += t.latency.aggregate_ms;
    }
    const double n = static_cast<double>(report.trials.size());
    m.align_ms /= n;
    m.transform_ms /= n;
    m.forward_ms /= n;
    m.rank_ms /= n;
    m.aggregate_ms /= n;
  }
  return report;
}

EvalReport RunStreamFromConfig(const StreamConfig& cfg) {
  cfg.Validate();
  Require(!cfg.model_path.empty(), ErrorKind::kConfig, "config names no model");
  Require(!cfg.stream_path.empty(), ErrorKind::kConfig, "config names no stream");
  const ModelBundle model = LoadModelFile(cfg.model_path);
  std::optional<RankHead> head;
  if (UsesRankHead(cfg.mode) && !cfg.force_uniform_weights) {
    Require(!cfg.rank_head_path.empty(), ErrorKind::kConfig,
            std::string("mode ") + ModeName(cfg.mode) + " needs a rank_head path");
    head = LoadRankHeadFile(cfg.rank_head_path);
  }
  std::optional<QuantModel> quant;
  if (cfg.quantized) {
    Require(!cfg.quant_model_path.empty(), ErrorKind::kConfig, "quantized.enabled needs quantized.model");
    quant = LoadQuantModelFile(cfg.quant_model_path);
  }
  const Stream stream = ReadStreamDir(cfg.stream_path);
  StreamInputs in{&model, head ? &*head : nullptr, quant ? &*quant : nullptr};
  EvalReport r = RunStream(cfg, in, stream);
  if (!cfg.report_path.empty()) WriteReportJson(cfg.report_path, r);
  if (!cfg.csv_path.empty()) WriteReportCsv(cfg.csv_path, r);
  return r;
}

namespace {

nlohmann::json LatencyJson(const Latency& l) {
  return {{"align", l.align_ms},     {"transform", l.transform_ms}, {"forward", l.forward_ms},
          {"rank", l.rank_ms},       {"aggregate", l.aggregate_ms}, {"total", l.total_ms()}};
}

nlohmann::json Optional(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json ReportToJson(const EvalReport& r) {
  nlohmann::json j;
  j["format"] = "bft-report";
  j["version"] = kReportVersion;
  j["config"] = r.config.ToJson();
  j["branches"] = r.branches;
  j["metrics"] = {{"n", r.metrics.n},
                  {"accuracy", Optional(r.metrics.accuracy)},
                  {"cc", Optional(r.metrics.cc)},
                  {"cc_defined", r.metrics.cc_defined},
                  {"rmse", Optional(r.metrics.rmse)},
                  {"ndcg_k", r.config.ndcg_k},
                  {"ndcg_mean", Optional(r.metrics.ndcg_mean)},
                  {"ndcg_median", Optional(r.metrics.ndcg_median)}};
  j["latency_ms"] = LatencyJson(r.mean_latency);
  nlohmann::json trials = nlohmann::json::array();
  for (const TrialRecord& t : r.trials) {
    nlohmann::json tj = {{"index", t.index},
                         {"label", t.label},
                         {"prediction", t.prediction},
                         {"weights", t.weights},
                         {"branch_losses", t.branch_losses},
                         {"ndcg", Optional(t.ndcg)},
                         {"latency_ms", LatencyJson(t.latency)}};
    if (!t.probs.empty()) tj["probs"] = t.probs;
    trials.push_back(std::move(tj));
  }
  j["trials"] = std::move(trials);
  return j;
}

void WriteReportJson(const std::filesystem::path& path, const EvalReport& r) {
  std::ofstream out(path);
  if (!out) Fail(ErrorKind::kData, "cannot write report " + path.string());
  out << ReportToJson(r).dump(2) << '\n';
}

void WriteReportCsv(const std::filesystem::path& path, const EvalReport& r) {
  std::ofstream out(path);
  if (!out) Fail(ErrorKind::kData, "cannot write csv " + path.string());
  out << std::setprecision(17);
  out << "version,index,label,prediction,ndcg,align_ms,transform_ms,forward_ms,rank_ms,aggregate_ms,total_ms,weights\n";
  for (const TrialRecord& t : r.trials) {
    out << kReportVersion << ',' << t.index << ',' << t.label << ',' << t.prediction << ',';
    if (t.ndcg) out << *t.ndcg;
    out << ',' << t.latency.align_ms << ',' << t.latency.transform_ms << ',' << t.latency.forward_ms << ','
        << t.latency.rank_ms << ',' << t.latency.aggregate_ms << ',' << t.latency.total_ms() << ',';
    for (std::size_t k = 0; k < t.weights.size(); ++k) out << (k ? ";" : "") << t.weights[k];
    out << '\n';
  }
}

}  // namespace bft

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

#include <cmath>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "bft/container.hpp"
#include "bft/model.hpp"
#include "bft/transforms.hpp"
#include "test_util.hpp"

namespace bft {
namespace {

const std::filesystem::path kData = BFT_TEST_DATA_DIR;

nlohmann::json ReadJson(const std::filesystem::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

Trial FixtureInput(const nlohmann::json& doc, const nlohmann::json& fx) {
  const std::size_t c = doc["channels"], s = doc["samples"];
  const std::vector<double> flat = fx["input"];
  Trial t(c, s, 128.0);
  t.data().values() = flat;
  return t;
}

class GoldenFixtures : public ::testing::TestWithParam<std::string> {};

TEST_P(GoldenFixtures, ForwardMatchesReference) {
  const nlohmann::json doc = ReadJson(kData / (GetParam() + ".fixtures.json"));
  const ModelBundle m = LoadModelFile(kData / doc["model"].get<std::string>());
  const double tol = doc["tolerance"];
  ASSERT_GE(doc["fixtures"].size(), 10u);
  for (const auto& fx : doc["fixtures"]) {
    const Trial t = FixtureInput(doc, fx);
    const FeatureVector f = Features(m, t);
    const std::vector<double> want_f = fx["feature"];
    ASSERT_EQ(f.dim(), want_f.size());
    for (std::size_t i = 0; i < f.dim(); ++i) EXPECT_NEAR(f[i], want_f[i], tol);
    // Head on the reference features, then end to end.
    const std::vector<double> want = fx["logits"];
    const Prediction p = Head(m, FeatureVector(want_f));
    const Prediction q = Forward(m, t);
    ASSERT_EQ(p.size(), want.size());
    for (std::size_t j = 0; j < want.size(); ++j) {
      EXPECT_NEAR(p.values[j], want[j], tol);
      EXPECT_NEAR(q.values[j], want[j], tol);
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Models, GoldenFixtures, ::testing::Values("eegnet_cls", "eegnet_reg"));

TEST(ModelFile, RoundTripIsDeterministic) {
  const ModelBundle m = LoadModelFile(kData / "eegnet_cls.bftw");
  const auto a = SerializeContainer(ModelToContainer(m));
  const auto b = SerializeContainer(ModelToContainer(LoadModel(a)));
  EXPECT_EQ(a, b);
  const ModelBundle exact = LoadModel(SerializeContainer(ModelToContainer(m, DType::kF64)));
  std::mt19937_64 rng(1);
  const Trial t = testing::RandomTrial(4, 128, rng);
  EXPECT_EQ(Forward(exact, t).values, Forward(m, t).values);
}

TEST(ModelFile, TruncatedPayloadNamesTensor) {
  std::vector<std::uint8_t> bytes = ReadFileBytes(kData / "eegnet_cls.bftw");
  bytes.resize(bytes.size() - 8);
  try {
    LoadModel(bytes);
    FAIL() << "expected a load error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kLoad);
    EXPECT_NE(std::string(e.what()).find("tensor 'layers."), std::string::npos) << e.what();
  }
}

TEST(ModelFile, RejectsCorruption) {
  const std::vector<std::uint8_t> good = ReadFileBytes(kData / "eegnet_cls.bftw");
  std::vector<std::uint8_t> bad = good;
  bad[0] = 'X';
  EXPECT_BFT_ERROR(LoadModel(bad), ErrorKind::kLoad);
  bad = good;
  bad[4] = 9;
  EXPECT_BFT_ERROR(LoadModel(bad), ErrorKind::kLoad);
  EXPECT_BFT_ERROR(LoadModel(std::vector<std::uint8_t>(good.begin(), good.begin() + 10)), ErrorKind::kLoad);

  Container c = ParseContainer(good);
  c.tensors.begin()->second.values[0] = std::nan("");
  EXPECT_BFT_ERROR(ModelFromContainer(c), ErrorKind::kLoad);
  Container missing = ParseContainer(good);
  missing.tensors.erase("layers.0.weight");
  EXPECT_BFT_ERROR(ModelFromContainer(missing), ErrorKind::kLoad);
  Container wrong = ParseContainer(good);
  wrong.manifest["format"] = "bft-rank";
  EXPECT_BFT_ERROR(ModelFromContainer(wrong), ErrorKind::kLoad);
}

TEST(Container, TensorDtypesRoundTrip) {
  Container c;
  c.manifest = {{"hello", "world"}};
  c.tensors["a"] = Tensor{DType::kF64, {2, 2}, {1.0 / 3.0, -2.0, 1e300, 0.0}};
  c.tensors["b"] = Tensor{DType::kI8, {3}, {-128, 0, 127}};
  c.tensors["c"] = Tensor{DType::kI32, {1}, {-123456789}};
  c.tensors["d"] = Tensor{DType::kF32, {1}, {0.1}};
  const Container back = ParseContainer(SerializeContainer(c));
  EXPECT_EQ(back.manifest["hello"], "world");
  EXPECT_EQ(back.at("a").values, c.tensors["a"].values);
  EXPECT_EQ(back.at("b").values, c.tensors["b"].values);
  EXPECT_EQ(back.at("c").values, c.tensors["c"].values);
  EXPECT_EQ(back.at("d").values[0], static_cast<double>(0.1f));
  EXPECT_BFT_ERROR(back.at("zz"), ErrorKind::kLoad);
}

Layer Flat() {
  Layer l;
  l.spec.kind = LayerKind::kFlatten;
  return l;
}

Layer Dense(std::size_t in, std::size_t out, std::vector<double> w, std::vector<double> b) {
  Layer l;
  l.spec.kind = LayerKind::kDense;
  l.spec.in_features = in;
  l.spec.out_features = out;
  l.spec.bias = !b.empty();
  l.weight = std::move(w);
  l.bias = std::move(b);
  return l;
}

TEST(Head, IdentityWeights) {
  const ModelBundle m({Flat(), Dense(2, 2, {1, 0, 0, 1}, {})}, HeadKind::kClassifier, 1, 2, 1.0);
  EXPECT_EQ(Head(m, FeatureVector({3.0, 1.0})).values, (std::vector<double>{3.0, 1.0}));
  EXPECT_EQ(Head(m, FeatureVector({0.0, 0.0})).values, (std::vector<double>{0.0, 0.0}));
  EXPECT_BFT_ERROR(Head(m, FeatureVector({1.0})), ErrorKind::kDimension);
}

TEST(Features, ZeroInputBiasFreeIsZero) {
  ModelBundle m = LoadModelFile(kData / "eegnet_cls.bftw");
  std::vector<Layer> layers = m.layers();
  for (Layer& l : layers)
    if (l.spec.kind == LayerKind::kBatchNorm) {
      std::fill(l.beta.begin(), l.beta.end(), 0.0);
      std::fill(l.running_mean.begin(), l.running_mean.end(), 0.0);
    }
  const ModelBundle z(layers, m.head_kind(), 4, 128, 128.0);
  const FeatureVector f = Features(z, Trial(4, 128, 128.0));
  for (double v : f.values) EXPECT_EQ(v, 0.0);
}

TEST(Features, BatchEqualsLoop) {
  const ModelBundle m = LoadModelFile(kData / "eegnet_cls.bftw");
  std::mt19937_64 rng(2);
  const Trial full = testing::RandomTrial(4, 256, rng);
  std::vector<Trial> trials;
  BankConfig cfg;
  cfg.slide_starts_s = {0.2, 0.5};
  for (const TransformSpec& s : BuildBank(cfg)) trials.push_back(ApplyTransform(full, s, 128));
  const std::vector<FeatureVector> batch = FeaturesBatch(m, trials);
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const FeatureVector one = Features(m, trials[i]);
    for (std::size_t j = 0; j < one.dim(); ++j) EXPECT_NEAR(batch[i][j], one[j], 1e-12);
  }
  EXPECT_BFT_ERROR(Features(m, Trial(4, 100, 128.0)), ErrorKind::kDimension);
}

// Hand-evaluated layers on tiny inputs.
TEST(ForwardLayer, TemporalConvSamePadding) {
  Layer l;
  l.spec = {.kind = LayerKind::kConv2dTemporal, .in_maps = 1, .out_maps = 1, .kernel = 3};
  l.weight = {1.0, 2.0, 3.0};
  Activation x(1, 1, 4);
  x.data = {1.0, 2.0, 3.0, 4.0};
  // y[t] = 1·x[t−1] + 2·x[t] + 3·x[t+1], zero outside.
  EXPECT_EQ(ForwardLayer(l, x).data, (std::vector<double>{8.0, 14.0, 20.0, 11.0}));
  l.spec.kernel = 2;
  l.weight = {1.0, 10.0};
  // Even kernel: pad left 0, right 1.
  EXPECT_EQ(ForwardLayer(l, x).data, (std::vector<double>{21.0, 32.0, 43.0, 4.0}));
}

TEST(ForwardLayer, DepthwisePoolEluBatchNorm) {
  Layer d;
  d.spec = {.kind = LayerKind::kDepthwiseConv, .in_maps = 1, .out_maps = 2, .kernel = 2};
  d.weight = {1.0, -1.0, 0.5, 0.5};
  Activation x(1, 2, 2);
  x.data = {1.0, 2.0, 3.0, 5.0};
  EXPECT_EQ(ForwardLayer(d, x).data, (std::vector<double>{-2.0, -3.0, 2.0, 3.5}));
  Layer p;
  p.spec = {.kind = LayerKind::kAvgPool, .pool = 2};
  Activation y(1, 1, 5);
  y.data = {1, 3, 5, 7, 100};
  EXPECT_EQ(ForwardLayer(p, y).data, (std::vector<double>{2.0, 6.0}));
  Layer e;
  e.spec.kind = LayerKind::kElu;
  Activation z(1, 1, 2);
  z.data = {-1.0, 2.0};
  const auto ez = ForwardLayer(e, z).data;
  EXPECT_DOUBLE_EQ(ez[0], std::exp(-1.0) - 1.0);
  EXPECT_EQ(ez[1], 2.0);
  Layer b;
  b.spec = {.kind = LayerKind::kBatchNorm, .in_maps = 1, .out_maps = 1, .eps = 0.0};
  b.gamma = {2.0};
  b.beta = {1.0};
  b.running_mean = {3.0};
  b.running_var = {4.0};
  Activation w(1, 1, 2);
  w.data = {3.0, 5.0};
  EXPECT_EQ(ForwardLayer(b, w).data, (std::vector<double>{1.0, 3.0}));
}

TEST(ModelBundle, RejectsBadComposition) {
  EXPECT_BFT_ERROR(ModelBundle({Dense(2, 2, {1, 0, 0, 1}, {})}, HeadKind::kClassifier, 1, 2, 1.0), ErrorKind::kLoad);
  EXPECT_BFT_ERROR(ModelBundle({Flat()}, HeadKind::kClassifier, 1, 2, 1.0), ErrorKind::kLoad);
  EXPECT_BFT_ERROR(ModelBundle({Flat(), Dense(3, 2, std::vector<double>(6, 0.0), {})}, HeadKind::kClassifier, 1, 2, 1.0),
                   ErrorKind::kLoad);
  EXPECT_BFT_ERROR(ModelBundle({Flat(), Dense(2, 2, {1, 0, 0, 1}, {})}, HeadKind::kRegressor, 1, 2, 1.0),
                   ErrorKind::kLoad);
}

std::vector<Trial> Batch(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Trial> out;
  for (std::size_t i = 0; i < n; ++i) {
    Trial t = testing::RandomTrial(4, 128, rng);
    for (double& v : t.data().values()) v = 2.0 * v + 0.5;
    out.push_back(t);
  }
  return out;
}

// Batch statistics of the input to each batch norm, from the inference
// forward with every earlier batch norm replaced by batch normalization.
TEST(BnAdapt, MomentumOneReplacesStats) {
  const ModelBundle m = LoadModelFile(kData / "eegnet_cls.bftw");
  const std::vector<Trial> batch = Batch(6, 3);
  const ModelBundle a = BnAdapt(m, batch, 1.0);
  // Oracle for the first batch norm (layer 1): the temporal conv output.
  std::vector<Activation> acts;
  for (const Trial& t : batch) acts.push_back(ForwardLayer(m.layers()[0], TrialToActivation(t)));
  const Layer& bn = a.layers()[1];
  for (std::size_t c = 0; c < bn.running_mean.size(); ++c) {
    double s = 0.0, ss = 0.0, n = 0.0;
    for (const Activation& x : acts)
      for (std::size_t p = 0; p < x.rows * x.cols; ++p) {
        const double v = x.data[c * x.rows * x.cols + p];
        s += v;
        ss += v * v;
        n += 1.0;
      }
    const double mu = s / n;
    EXPECT_NEAR(bn.running_mean[c], mu, 1e-10);
    EXPECT_NEAR(bn.running_var[c], (ss - n * mu * mu) / (n - 1.0), 1e-9);
  }
  EXPECT_EQ(a.layers()[1].gamma, m.layers()[1].gamma);
  EXPECT_EQ(a.layers()[1].beta, m.layers()[1].beta);
}

TEST(BnAdapt, RepeatedBatchesConvergeGeometrically) {
  const ModelBundle m = LoadModelFile(kData / "eegnet_cls.bftw");
  const std::vector<Trial> batch = Batch(4, 4);
  // The first batch norm's target does not depend on its own running stats.
  const double target = BnAdapt(m, batch, 1.0).layers()[1].running_mean[0];
  ModelBundle cur = m;
  double gap = std::abs(m.layers()[1].running_mean[0] - target);
  for (int it = 0; it < 20; ++it) {
    cur = BnAdapt(cur, batch, 0.1);
    const double g = std::abs(cur.layers()[1].running_mean[0] - target);
    EXPECT_NEAR(g, 0.9 * gap, 1e-9 + 1e-9 * gap);
    gap = g;
  }
  EXPECT_BFT_ERROR(BnAdapt(m, batch, 0.0), ErrorKind::kContract);
  EXPECT_BFT_ERROR(BnAdapt(m, std::vector<Trial>{}, 0.5), ErrorKind::kContract);
}

}  // namespace
}  // namespace bft

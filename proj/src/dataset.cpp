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

#include "bft/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>

#include "bft/container.hpp"
#include "bft/error.hpp"
#include "bft/numerics.hpp"

namespace bft {

const char* TaskName(Task t) { return t == Task::kClassification ? "classification" : "regression"; }

Task ParseTask(const std::string& name) {
  if (name == "classification") return Task::kClassification;
  if (name == "regression") return Task::kRegression;
  Fail(ErrorKind::kConfig, "unknown task '" + name + "'");
}

namespace {

std::string TrialFileName(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "trial_%05zu.bin", i);
  return buf;
}

}  // namespace

void WriteStreamDir(const std::filesystem::path& dir, const Stream& s) {
  Require(s.trials.size() == s.labels.size(), ErrorKind::kData, "stream trials and labels differ in count");
  Require(!s.trials.empty(), ErrorKind::kData, "stream is empty");
  std::filesystem::create_directories(dir);
  nlohmann::json index = {{"version", 1},
                          {"task", TaskName(s.task)},
                          {"classes", s.classes},
                          {"channels", s.trials.front().channels()},
                          {"samples", s.trials.front().samples()},
                          {"rate_hz", s.trials.front().rate_hz()},
                          {"subject", s.subject},
                          {"trials", nlohmann::json::array()}};
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Trial& t = s.trials[i];
    Require(t.channels() == s.trials.front().channels() && t.samples() == s.trials.front().samples(),
            ErrorKind::kData, "trial " + std::to_string(i) + " differs in shape from trial 0");
    const std::string name = TrialFileName(i);
    std::vector<std::uint8_t> bytes(t.data().values().size() * sizeof(double));
    std::memcpy(bytes.data(), t.data().values().data(), bytes.size());
    WriteFileBytes(dir / name, bytes);
    index["trials"].push_back({{"file", name}, {"label", s.labels[i]}});
  }
  std::ofstream(dir / "index.json") << index.dump(1) << "\n";
}

Stream ReadStreamDir(const std::filesystem::path& dir) {
  std::ifstream in(dir / "index.json");
  Require(static_cast<bool>(in), ErrorKind::kLoad, "cannot open " + (dir / "index.json").string());
  try {
    const nlohmann::json index = nlohmann::json::parse(in);
    Require(index.value("version", 0) == 1, ErrorKind::kLoad, "unsupported stream index version");
    Stream s;
    s.task = ParseTask(index.at("task").get<std::string>());
    s.classes = index.value("classes", std::size_t{2});
    s.subject = index.value("subject", 0);
    const std::size_t c = index.at("channels");
    const std::size_t n = index.at("samples");
    const double rate = index.at("rate_hz");
    const auto& trials = index.at("trials");
    for (std::size_t i = 0; i < trials.size(); ++i) {
      const std::vector<std::uint8_t> bytes = ReadFileBytes(dir / trials[i].at("file").get<std::string>());
      Require(bytes.size() == c * n * sizeof(double), ErrorKind::kLoad,
              "trial " + std::to_string(i) + ": file size does not match channels x samples");
      Matrix m(c, n);
      std::memcpy(m.values().data(), bytes.data(), bytes.size());
      Trial t(std::move(m), rate);
      Require(t.AllFinite(), ErrorKind::kLoad, "trial " + std::to_string(i) + ": non-finite samples");
      const double label = trials[i].at("label");
      Require(std::isfinite(label), ErrorKind::kLoad, "trial " + std::to_string(i) + ": label is not finite");
      s.trials.push_back(std::move(t));
      s.labels.push_back(label);
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kLoad, std::string("malformed stream index: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kLoad) throw;
    Fail(ErrorKind::kLoad, e.what());
  }
}

void DatasetSpec::Validate() const {
  Require(channels >= 2, ErrorKind::kConfig, "dataset needs at least 2 channels");
  Require(rate_hz > 0.0 && trial_s > 1.0, ErrorKind::kConfig, "dataset needs rate > 0 and trials longer than 1 s");
  Require(subjects >= 1 && trials_per_subject >= 1, ErrorKind::kConfig, "dataset needs subjects and trials");
  const std::size_t sources = task == Task::kClassification ? classes : 2;
  Require(task == Task::kRegression || classes >= 2, ErrorKind::kConfig, "classification needs >= 2 classes");
  Require(sources <= channels, ErrorKind::kConfig, "more task sources than channels");
  Require(onset_s.first >= 0.0 && onset_s.first <= onset_s.second, ErrorKind::kConfig, "invalid onset window");
  Require(onset_s.second + onset_jitter_s <= trial_s, ErrorKind::kConfig, "onset window exceeds the trial");
  Require(event_s > 0.0 && onset_jitter_s >= 0.0, ErrorKind::kConfig, "invalid event duration or jitter");
  Require(band_hz.first > 0.0 && band_hz.first < band_hz.second && band_hz.second < rate_hz / 2.0, ErrorKind::kConfig,
          "carrier band must lie inside (0, Nyquist)");
  Require(mixing_shift >= 0.0 && spectral_tilt >= 0.0 && sensor_noise >= 0.0 && amplitude_shift >= 0.0,
          ErrorKind::kConfig, "shift parameters must be non-negative");
  Require(artifact_rate >= 0.0 && artifact_rate <= 1.0, ErrorKind::kConfig, "artifact_rate must be in [0, 1]");
  Require(artifact_s > 0.0 && artifact_s <= trial_s && artifact_gain >= 0.0, ErrorKind::kConfig,
          "invalid artifact duration or gain");
}

nlohmann::json DatasetSpec::ToJson() const {
  return {{"task", TaskName(task)},
          {"classes", classes},
          {"channels", channels},
          {"rate_hz", rate_hz},
          {"trial_s", trial_s},
          {"subjects", subjects},
          {"trials_per_subject", trials_per_subject},
          {"mixing_shift", mixing_shift},
          {"spectral_tilt", spectral_tilt},
          {"onset_s", {onset_s.first, onset_s.second}},
          {"onset_jitter_s", onset_jitter_s},
          {"event_s", event_s},
          {"event_gain", event_gain},
          {"band_hz", {band_hz.first, band_hz.second}},
          {"sensor_noise", sensor_noise},
          {"amplitude_shift", amplitude_shift},
          {"artifact_rate", artifact_rate},
          {"artifact_s", artifact_s},
          {"artifact_gain", artifact_gain}};
}

DatasetSpec DatasetSpec::FromJson(const nlohmann::json& j) {
  DatasetSpec s;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "task") s.task = ParseTask(value.get<std::string>());
      else if (key == "classes") s.classes = value;
      else if (key == "channels") s.channels = value;
      else if (key == "rate_hz") s.rate_hz = value;
      else if (key == "trial_s") s.trial_s = value;
      else if (key == "subjects") s.subjects = value;
      else if (key == "trials_per_subject") s.trials_per_subject = value;
      else if (key == "mixing_shift") s.mixing_shift = value;
      else if (key == "spectral_tilt") s.spectral_tilt = value;
      else if (key == "onset_s") s.onset_s = {value.at(0), value.at(1)};
      else if (key == "onset_jitter_s") s.onset_jitter_s = value;
      else if (key == "event_s") s.event_s = value;
      else if (key == "event_gain") s.event_gain = value;
      else if (key == "band_hz") s.band_hz = {value.at(0), value.at(1)};
      else if (key == "sensor_noise") s.sensor_noise = value;
      else if (key == "amplitude_shift") s.amplitude_shift = value;
      else if (key == "artifact_rate") s.artifact_rate = value;
      else if (key == "artifact_s") s.artifact_s = value;
      else if (key == "artifact_gain") s.artifact_gain = value;
      else Fail(ErrorKind::kConfig, "unknown dataset spec key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kConfig, std::string("malformed dataset spec: ") + e.what());
  }
  s.Validate();
  return s;
}

namespace {

// White Gaussian noise shaped in the frequency domain, scaled to unit std.
std::vector<double> ShapedNoise(std::size_t n, double rate, std::mt19937_64& rng,
                                const std::function<double(double)>& gain) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Complex> x(n);
  for (Complex& v : x) v = g(rng);
  std::vector<Complex> spec = Fft(x);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t fi = std::min(i, n - i);
    spec[i] *= gain(static_cast<double>(fi) * rate / static_cast<double>(n));
  }
  const std::vector<Complex> y = Fft(spec, true);
  std::vector<double> out(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = y[i].real();
    ss += out[i] * out[i];
  }
  const double sd = std::sqrt(ss / static_cast<double>(n));
  if (sd > 0.0)
    for (double& v : out) v /= sd;
  return out;
}

double HannWindow(double t, double start, double len) {
  if (t < start || t > start + len) return 0.0;
  const double u = (t - start) / len;
  return 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * u);
}

struct Subject {
  Matrix mixing;
  double amplitude = 1.0;
  double beta = 1.0;
  double onset_lo = 0.0;
};

}  // namespace

std::vector<Stream> GenSyntheticDataset(const DatasetSpec& spec, std::uint64_t seed) {
  spec.Validate();
  const std::size_t c = spec.channels;
  const std::size_t n = static_cast<std::size_t>(std::llround(spec.trial_s * spec.rate_hz));
  const std::size_t task_sources = spec.task == Task::kClassification ? spec.classes : 2;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  Matrix base = Matrix::Identity(c);
  for (double& v : base.values()) v += g(rng) / std::sqrt(static_cast<double>(c));

  std::vector<Stream> out;
  for (std::size_t s = 0; s < spec.subjects; ++s) {
    Subject sub;
    sub.mixing = base;
    for (double& v : sub.mixing.values()) v += spec.mixing_shift * g(rng) / std::sqrt(static_cast<double>(c));
    sub.amplitude = std::exp(spec.amplitude_shift * (2.0 * u(rng) - 1.0));
    sub.beta = 1.0 + spec.spectral_tilt * (2.0 * u(rng) - 1.0);
    sub.onset_lo = spec.onset_s.first + (spec.onset_s.second - spec.onset_s.first) * u(rng);

    Stream st;
    st.task = spec.task;
    st.classes = spec.task == Task::kClassification ? spec.classes : 0;
    st.subject = static_cast<int>(s);
    for (std::size_t i = 0; i < spec.trials_per_subject; ++i) {
      double label = 0.0;
      std::vector<double> gains(task_sources, 0.0);
      if (spec.task == Task::kClassification) {
        label = static_cast<double>(i % spec.classes);
        gains[i % spec.classes] = 1.0;
      } else {
        label = u(rng);
        gains[0] = label;
        gains[1] = 1.0 - label;
      }
      const double onset = sub.onset_lo + spec.onset_jitter_s * u(rng);
      Matrix src(c, n);
      for (std::size_t j = 0; j < c; ++j) {
        std::vector<double> x;
        if (j < task_sources) {
          const auto [lo, hi] = spec.band_hz;
          x = ShapedNoise(n, spec.rate_hz, rng, [lo, hi](double f) { return f >= lo && f <= hi ? 1.0 : 0.0; });
          for (std::size_t t = 0; t < n; ++t) {
            const double time = static_cast<double>(t) / spec.rate_hz;
            x[t] *= 1.0 + spec.event_gain * gains[j] * HannWindow(time, onset, spec.event_s);
          }
        } else {
          const double beta = sub.beta;
          x = ShapedNoise(n, spec.rate_hz, rng, [beta](double f) { return f > 0.0 ? std::pow(f, -beta / 2.0) : 0.0; });
        }
        std::copy(x.begin(), x.end(), src.row(j).begin());
      }
      Matrix x = sub.amplitude * (sub.mixing * src);
      if (u(rng) < spec.artifact_rate) {
        // Broadband burst with a random spatial pattern at a random time.
        const double start = (spec.trial_s - spec.artifact_s) * u(rng);
        std::vector<double> pattern(c);
        double norm = 0.0;
        for (double& v : pattern) {
          v = g(rng);
          norm += v * v;
        }
        double power = 0.0;
        for (double v : x.values()) power += v * v;
        const double level = spec.artifact_gain * std::sqrt(power / static_cast<double>(c * n)) *
                             std::sqrt(static_cast<double>(c) / norm);
        const std::vector<double> burst =
            ShapedNoise(n, spec.rate_hz, rng, [](double f) { return f > 0.0 ? std::min(1.0, 4.0 / f) : 0.0; });
        for (std::size_t t = 0; t < n; ++t) {
          const double w = HannWindow(static_cast<double>(t) / spec.rate_hz, start, spec.artifact_s);
          if (w == 0.0) continue;
          for (std::size_t j = 0; j < c; ++j) x(j, t) += level * pattern[j] * w * burst[t];
        }
      }
      for (double& v : x.values()) v += spec.sensor_noise * g(rng);
      st.trials.emplace_back(std::move(x), spec.rate_hz);
      st.labels.push_back(label);
    }
    // Interleave classes without a fixed period.
    std::vector<std::size_t> order(st.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    Stream shuffled = st;
    for (std::size_t i = 0; i < order.size(); ++i) {
      shuffled.trials[i] = st.trials[order[i]];
      shuffled.labels[i] = st.labels[order[i]];
    }
    out.push_back(std::move(shuffled));
  }
  return out;
}

void WriteDatasetDir(const std::filesystem::path& dir, const DatasetSpec& spec, std::uint64_t seed,
                     const std::vector<Stream>& subjects) {
  std::filesystem::create_directories(dir);
  nlohmann::json j = spec.ToJson();
  j["seed"] = seed;
  std::ofstream(dir / "spec.json") << j.dump(1) << "\n";
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "subject_%02zu", s);
    WriteStreamDir(dir / buf, subjects[s]);
  }
}

}  // namespace bft

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

// Labeled trial streams, their on-disk layout, and a synthetic multi-subject
// generator.
//
// Stream directory layout:
//   index.json           {"version": 1, "task", "classes", "channels",
//                         "samples", "rate_hz", "subject",
//                         "trials": [{"file", "label"}, ...]}
//   trial_NNNNN.bin      channels × samples little-endian float64,
//                        channel-major

#ifndef BFT_DATASET_HPP_
#define BFT_DATASET_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bft/trial.hpp"

namespace bft {

enum class Task { kClassification, kRegression };

const char* TaskName(Task t);
Task ParseTask(const std::string& name);

struct Stream {
  Task task = Task::kClassification;
  std::size_t classes = 2;  // classification only
  int subject = 0;
  std::vector<Trial> trials;
  std::vector<double> labels;  // class index or regression target

  std::size_t size() const { return trials.size(); }
};

void WriteStreamDir(const std::filesystem::path& dir, const Stream& s);
/// Throws kLoad naming the offending trial index.
Stream ReadStreamDir(const std::filesystem::path& dir);

struct DatasetSpec {
  Task task = Task::kClassification;
  std::size_t classes = 2;
  std::size_t channels = 8;
  double rate_hz = 128.0;
  double trial_s = 4.0;
  std::size_t subjects = 5;
  std::size_t trials_per_subject = 100;
  /// Per-subject mixing A_s = A_0 + mixing_shift · N_s, N_s Gaussian.
  double mixing_shift = 0.5;
  /// Per-subject background 1/f exponent is 1 + U(−tilt, tilt).
  double spectral_tilt = 0.5;
  /// Event onset window, seconds; each subject draws its own sub-window.
  std::pair<double, double> onset_s = {0.3, 1.4};
  double onset_jitter_s = 0.4;
  double event_s = 1.6;
  double event_gain = 0.5;
  /// Carrier band of the task sources, Hz.
  std::pair<double, double> band_hz = {8.0, 13.0};
  double sensor_noise = 0.3;
  /// Per-subject overall amplitude spread, as a log-uniform half-width.
  double amplitude_shift = 0.5;
  /// Probability that a trial carries a transient broadband artifact, its
  /// duration, and its std relative to the clean sensor signal.
  double artifact_rate = 0.0;
  double artifact_s = 0.4;
  double artifact_gain = 3.0;

  void Validate() const;
  nlohmann::json ToJson() const;
  static DatasetSpec FromJson(const nlohmann::json& j);
};

/// One stream per subject. Deterministic in (spec, seed).
std::vector<Stream> GenSyntheticDataset(const DatasetSpec& spec, std::uint64_t seed);

/// Writes subject_XX/ stream directories plus spec.json under `dir`.
void WriteDatasetDir(const std::filesystem::path& dir, const DatasetSpec& spec, std::uint64_t seed,
                     const std::vector<Stream>& subjects);

}  // namespace bft

#endif  // BFT_DATASET_HPP_

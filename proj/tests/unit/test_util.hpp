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

#ifndef BFT_TESTS_TEST_UTIL_HPP_
#define BFT_TESTS_TEST_UTIL_HPP_

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "bft/error.hpp"
#include "bft/numerics.hpp"
#include "bft/trial.hpp"

namespace bft::testing {

inline Trial RandomTrial(std::size_t channels, std::size_t samples, std::mt19937_64& rng, double rate = 128.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  Trial t(channels, samples, rate);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t s = 0; s < samples; ++s) t.at(c, s) = n(rng);
  // Mix channels so the covariance is not near-diagonal.
  for (std::size_t c = 1; c < channels; ++c)
    for (std::size_t s = 0; s < samples; ++s) t.at(c, s) += 0.5 * t.at(c - 1, s);
  return t;
}

inline Matrix RandomSpd(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix a(n, n);
  for (double& v : a.values()) v = g(rng);
  Matrix s = a * a.Transposed();
  for (std::size_t i = 0; i < n; ++i) s(i, i) += 0.5;
  return s;
}

inline double MaxAbsDiff(const Matrix& a, const Matrix& b) { return MaxAbs(a - b); }

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("bft_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace bft::testing

#define EXPECT_BFT_ERROR(stmt, expected_kind)                                    \
  do {                                                                           \
    try {                                                                        \
      stmt;                                                                      \
      ADD_FAILURE() << "expected " << ::bft::ErrorKindName(expected_kind);       \
    } catch (const ::bft::Error& e) {                                            \
      EXPECT_EQ(e.kind(), expected_kind) << e.what();                            \
    }                                                                            \
  } while (0)

#endif  // BFT_TESTS_TEST_UTIL_HPP_

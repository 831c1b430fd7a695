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

#ifndef BFT_ERROR_HPP_
#define BFT_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace bft {

enum class ErrorKind {
  kDegenerateInput,
  kDimension,
  kContract,
  kNumerical,
  kRange,
  kConfig,
  kLoad,
  kNotInitialized,
  kData,
  kTraining,
};

const char* ErrorKindName(ErrorKind kind);

/// Every failure raised by the library carries one of the kinds above so the
/// CLI can map it onto an exit code without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(ErrorKindName(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDegenerateInput: return "degenerate input";
    case ErrorKind::kDimension: return "dimension error";
    case ErrorKind::kContract: return "contract violation";
    case ErrorKind::kNumerical: return "numerical error";
    case ErrorKind::kRange: return "range error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kLoad: return "load error";
    case ErrorKind::kNotInitialized: return "not initialized";
    case ErrorKind::kData: return "data error";
    case ErrorKind::kTraining: return "training error";
  }
  return "error";
}

[[noreturn]] inline void Fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void Require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) Fail(kind, what);
}

}  // namespace bft

#endif  // BFT_ERROR_HPP_

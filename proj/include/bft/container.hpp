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

// Weight container ("BFTW"):
//
//   offset 0   4 bytes   magic "BFTW"
//   offset 4   u32 LE    format version (currently 1)
//   offset 8   u64 LE    manifest length N in bytes
//   offset 16  N bytes   UTF-8 JSON manifest
//   offset 16+N          tensor payload
//
// The manifest's "tensors" array lists {name, dtype, shape, offset, nbytes}
// with offsets relative to the payload start. dtype is one of f32, f64, i8,
// i32, all little-endian. Everything else in the manifest is owned by the
// producer (layer graph, rank-head sections, quantization parameters).

#ifndef BFT_CONTAINER_HPP_
#define BFT_CONTAINER_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace bft {

inline constexpr std::uint32_t kContainerVersion = 1;

enum class DType { kF32, kF64, kI8, kI32 };

const char* DTypeName(DType t);

/// Values are held as doubles in memory regardless of the stored dtype; i8
/// and i32 values are exact integers.
struct Tensor {
  DType dtype = DType::kF32;
  std::vector<std::size_t> shape;
  std::vector<double> values;

  std::size_t numel() const;
};

struct Container {
  nlohmann::json manifest = nlohmann::json::object();
  std::map<std::string, Tensor> tensors;

  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const { return tensors.count(name) > 0; }
};

std::vector<std::uint8_t> SerializeContainer(const Container& c);
Container ParseContainer(std::span<const std::uint8_t> bytes);

void WriteContainerFile(const std::filesystem::path& path, const Container& c);
Container ReadContainerFile(const std::filesystem::path& path);

std::vector<std::uint8_t> ReadFileBytes(const std::filesystem::path& path);
void WriteFileBytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace bft

#endif  // BFT_CONTAINER_HPP_

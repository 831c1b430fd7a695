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

#include "bft/container.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "bft/error.hpp"

namespace bft {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

const char* DTypeName(DType t) {
  switch (t) {
    case DType::kF32: return "f32";
    case DType::kF64: return "f64";
    case DType::kI8: return "i8";
    case DType::kI32: return "i32";
  }
  return "?";
}

namespace {

DType ParseDType(const std::string& s) {
  if (s == "f32") return DType::kF32;
  if (s == "f64") return DType::kF64;
  if (s == "i8") return DType::kI8;
  if (s == "i32") return DType::kI32;
  Fail(ErrorKind::kLoad, "unknown dtype '" + s + "'");
}

std::size_t DTypeSize(DType t) {
  switch (t) {
    case DType::kF32: return 4;
    case DType::kF64: return 8;
    case DType::kI8: return 1;
    case DType::kI32: return 4;
  }
  return 0;
}

template <typename T>
void Append(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

template <typename T>
T Load(const std::uint8_t* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

}  // namespace

std::size_t Tensor::numel() const {
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  return n;
}

const Tensor& Container::at(const std::string& name) const {
  auto it = tensors.find(name);
  Require(it != tensors.end(), ErrorKind::kLoad, "missing tensor '" + name + "'");
  return it->second;
}

std::vector<std::uint8_t> SerializeContainer(const Container& c) {
  nlohmann::json manifest = c.manifest;
  nlohmann::json entries = nlohmann::json::array();
  std::vector<std::uint8_t> payload;
  for (const auto& [name, t] : c.tensors) {
    Require(t.values.size() == t.numel(), ErrorKind::kContract, "tensor '" + name + "' shape/value mismatch");
    const std::size_t offset = payload.size();
    for (double v : t.values) {
      switch (t.dtype) {
        case DType::kF32: Append(payload, static_cast<float>(v)); break;
        case DType::kF64: Append(payload, v); break;
        case DType::kI8: Append(payload, static_cast<std::int8_t>(v)); break;
        case DType::kI32: Append(payload, static_cast<std::int32_t>(v)); break;
      }
    }
    entries.push_back({{"name", name},
                       {"dtype", DTypeName(t.dtype)},
                       {"shape", t.shape},
                       {"offset", offset},
                       {"nbytes", payload.size() - offset}});
  }
  manifest["tensors"] = entries;
  const std::string text = manifest.dump();

  std::vector<std::uint8_t> out = {'B', 'F', 'T', 'W'};
  Append(out, kContainerVersion);
  Append(out, static_cast<std::uint64_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Container ParseContainer(std::span<const std::uint8_t> bytes) {
  Require(bytes.size() >= 16, ErrorKind::kLoad, "file too short for a container header");
  Require(std::memcmp(bytes.data(), "BFTW", 4) == 0, ErrorKind::kLoad, "bad magic (expected BFTW)");
  const auto version = Load<std::uint32_t>(bytes.data() + 4);
  Require(version == kContainerVersion, ErrorKind::kLoad,
          "unsupported container version " + std::to_string(version));
  const auto mlen = Load<std::uint64_t>(bytes.data() + 8);
  Require(mlen <= bytes.size() - 16, ErrorKind::kLoad, "manifest truncated");

  Container c;
  try {
    c.manifest = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(mlen));
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kLoad, std::string("manifest is not valid JSON: ") + e.what());
  }
  Require(c.manifest.is_object() && c.manifest.contains("tensors") && c.manifest["tensors"].is_array(),
          ErrorKind::kLoad, "manifest lacks a tensors array");

  const std::uint8_t* payload = bytes.data() + 16 + mlen;
  const std::size_t payload_size = bytes.size() - 16 - mlen;
  for (const auto& e : c.manifest["tensors"]) {
    std::string name;
    Tensor t;
    std::size_t offset = 0, nbytes = 0;
    try {
      name = e.at("name").get<std::string>();
      t.dtype = ParseDType(e.at("dtype").get<std::string>());
      t.shape = e.at("shape").get<std::vector<std::size_t>>();
      offset = e.at("offset").get<std::size_t>();
      nbytes = e.at("nbytes").get<std::size_t>();
    } catch (const nlohmann::json::exception& ex) {
      Fail(ErrorKind::kLoad, std::string("malformed tensor entry: ") + ex.what());
    }
    const std::size_t n = t.numel();
    Require(nbytes == n * DTypeSize(t.dtype), ErrorKind::kLoad, "tensor '" + name + "' byte size does not match shape");
    Require(offset <= payload_size && nbytes <= payload_size - offset, ErrorKind::kLoad,
            "tensor '" + name + "' is missing or truncated");
    t.values.resize(n);
    const std::uint8_t* p = payload + offset;
    for (std::size_t i = 0; i < n; ++i) {
      switch (t.dtype) {
        case DType::kF32: t.values[i] = Load<float>(p + 4 * i); break;
        case DType::kF64: t.values[i] = Load<double>(p + 8 * i); break;
        case DType::kI8: t.values[i] = Load<std::int8_t>(p + i); break;
        case DType::kI32: t.values[i] = Load<std::int32_t>(p + 4 * i); break;
      }
    }
    c.tensors.emplace(name, std::move(t));
  }
  c.manifest.erase("tensors");
  return c;
}

std::vector<std::uint8_t> ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Require(static_cast<bool>(in), ErrorKind::kData, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void WriteFileBytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  Require(static_cast<bool>(out), ErrorKind::kData, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void WriteContainerFile(const std::filesystem::path& path, const Container& c) {
  WriteFileBytes(path, SerializeContainer(c));
}

Container ReadContainerFile(const std::filesystem::path& path) { return ParseContainer(ReadFileBytes(path)); }

}  // namespace bft

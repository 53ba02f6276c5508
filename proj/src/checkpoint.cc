// Copyright 2026 The SSLAM Authors
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

#include "sslam/checkpoint.h"

#include <stdexcept>
#include <string_view>
#include <unordered_set>

#include "sslam/errors.h"
#include "sslam/le_io.h"

namespace sslam::ckpt {

namespace {

constexpr std::string_view kMagic = "SSLAMCKPT";

}  // namespace

void Checkpoint::put(const std::string& name, const Mat& value, DType dtype) {
  for (auto& t : tensors) {
    if (t.name == name) {
      t.value = value;
      t.dtype = dtype;
      return;
    }
  }
  tensors.push_back({name, value, dtype});
}

bool Checkpoint::contains(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return true;
  return false;
}

const Mat& Checkpoint::get(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t.value;
  throw DataError("checkpoint has no tensor '" + name + "'");
}

std::vector<std::string> Checkpoint::names_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& t : tensors)
    if (t.name.rfind(prefix, 0) == 0) out.push_back(t.name.substr(prefix.size()));
  return out;
}

std::vector<char> serialize(const Checkpoint& c) {
  le::Writer w;
  w.raw(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(c.stage));
  w.u64(static_cast<std::uint64_t>(c.step));
  w.str(c.meta);
  w.u32(static_cast<std::uint32_t>(c.tensors.size()));
  std::unordered_set<std::string> seen;
  for (const auto& t : c.tensors) {
    if (!seen.insert(t.name).second)
      throw std::invalid_argument("checkpoint: duplicate tensor " + t.name);
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.dtype));
    w.u32(static_cast<std::uint32_t>(t.value.rows()));
    w.u32(static_cast<std::uint32_t>(t.value.cols()));
    for (Eigen::Index i = 0; i < t.value.size(); ++i) {
      if (t.dtype == DType::kF32) {
        w.f32(static_cast<float>(t.value.data()[i]));
      } else {
        w.f64(t.value.data()[i]);
      }
    }
  }
  return w.bytes();
}

Checkpoint deserialize(const std::vector<char>& bytes, const std::string& source) {
  le::Reader r(bytes, source);
  if (r.raw(kMagic.size()) != kMagic) throw DataError(source + ": not an SSLAM checkpoint");
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw DataError(source + ": unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  c.stage = static_cast<int>(r.u32());
  c.step = static_cast<std::int64_t>(r.u64());
  c.meta = r.str();
  const std::uint32_t n = r.u32();
  std::unordered_set<std::string> seen;
  for (std::uint32_t i = 0; i < n; ++i) {
    Tensor t;
    t.name = r.str();
    if (!seen.insert(t.name).second) throw DataError(source + ": duplicate tensor " + t.name);
    const std::uint32_t dtype = r.u32();
    if (dtype > 1) throw DataError(source + ": unknown dtype for " + t.name);
    t.dtype = static_cast<DType>(dtype);
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    t.value.resize(rows, cols);
    for (Eigen::Index j = 0; j < t.value.size(); ++j)
      t.value.data()[j] = t.dtype == DType::kF32 ? static_cast<double>(r.f32()) : r.f64();
    c.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw DataError(source + ": trailing bytes after tensor table");
  return c;
}

void save(const Checkpoint& c, const std::filesystem::path& path) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  le::Writer w;
  const std::vector<char> bytes = serialize(c);
  w.raw(std::string_view(bytes.data(), bytes.size()));
  w.save(tmp);
  std::filesystem::rename(tmp, path);
}

Checkpoint load(const std::filesystem::path& path) {
  return deserialize(le::read_file(path), path.string());
}

}  // namespace sslam::ckpt

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

// Binary checkpoint container.
//
// Layout (little-endian):
//   "SSLAMCKPT" u32 version u32 stage u64 step str meta u32 n_tensors
//   n_tensors x { str name u32 dtype u32 rows u32 cols payload }
// where str is u32 length + bytes and dtype 0 = f32, 1 = f64. Tensor names
// are prefixed with student/, teacher/, adam_m/ or adam_v/.

#ifndef SSLAM_CHECKPOINT_H_
#define SSLAM_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sslam/autograd.h"

namespace sslam::ckpt {

inline constexpr std::uint32_t kVersion = 1;

enum class DType : std::uint32_t { kF32 = 0, kF64 = 1 };

struct Tensor {
  std::string name;
  Mat value;
  DType dtype = DType::kF64;
};

struct Checkpoint {
  int stage = 1;
  std::int64_t step = 0;
  std::string meta;  // JSON text
  std::vector<Tensor> tensors;

  void put(const std::string& name, const Mat& value, DType dtype = DType::kF64);
  bool contains(const std::string& name) const;
  const Mat& get(const std::string& name) const;
  // Names starting with `prefix`, with the prefix removed, in stored order.
  std::vector<std::string> names_with_prefix(const std::string& prefix) const;
};

std::vector<char> serialize(const Checkpoint& c);
Checkpoint deserialize(const std::vector<char>& bytes, const std::string& source);

// Writes to a temporary sibling and renames it into place.
void save(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load(const std::filesystem::path& path);

}  // namespace sslam::ckpt

#endif  // SSLAM_CHECKPOINT_H_

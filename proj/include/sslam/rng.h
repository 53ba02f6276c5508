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

#ifndef SSLAM_RNG_H_
#define SSLAM_RNG_H_

#include <cstdint>
#include <random>

namespace sslam {

// Stream ids for derive_seed.
enum class Stream : std::uint64_t { kInit = 1, kStep, kEpoch, kProbe, kSynth, kFinetune };

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Independent seed for (seed, stream, index), e.g. the RNG of one training
// step, so any step can be replayed without replaying its predecessors.
inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(stream)) ^ index);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, Stream stream, std::uint64_t index) {
  return std::mt19937_64(derive_seed(seed, stream, index));
}

}  // namespace sslam

#endif  // SSLAM_RNG_H_

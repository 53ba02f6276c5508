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

// Patch tokenization, positional encoding and inverse block multi-masking.
//
// A [T x F] spectrogram becomes a (F/16) x (T/16) grid of 16x16 patches.
// Patch index k runs time-major: k = col * rows + row, so all frequency
// patches of one time column are contiguous.

#ifndef SSLAM_PATCHER_H_
#define SSLAM_PATCHER_H_

#include <random>
#include <vector>

#include <json.hpp>

#include "sslam/autograd.h"
#include "sslam/dsp.h"
#include "sslam/mixer.h"

namespace sslam::patch {

inline constexpr int kPatchSize = 16;
inline constexpr int kPatchDim = kPatchSize * kPatchSize;
inline constexpr int kClsPosition = -1;

struct PatchGrid {
  int rows = 0;  // frequency patches
  int cols = 0;  // time patches

  int patches() const { return rows * cols; }
  int index(int row, int col) const { return col * rows + row; }
  int row_of(int k) const { return k % rows; }
  int col_of(int k) const { return k / rows; }
  bool operator==(const PatchGrid&) const = default;
};

PatchGrid grid_for(int frames, int bins);

struct MaskSet {
  int clone_id = 0;
  std::vector<int> visible;  // sorted
  std::vector<int> masked;   // sorted complement
};

// Rows of `tokens` carry grid positions; the CLS row, when present, is row 0
// with position kClsPosition.
struct TokenSequence {
  ag::Var tokens;
  std::vector<int> positions;
  bool cls_present = false;

  int size() const { return static_cast<int>(positions.size()); }
};

struct PatchEmbedding {
  ag::Var weight;  // [256 x width]
  ag::Var bias;    // [1 x width]
};

// [P x 256]; patch k flattened frame-major (frame * 16 + bin).
Mat extract_patches(const dsp::LogMelSpectrogram& s);

TokenSequence patchify(const dsp::LogMelSpectrogram& s, const PatchEmbedding& embed);

// Fixed 2D sine-cosine table, [P x width]. The first half of the channels
// encodes the frequency row, the second half the time column. Width must be
// a multiple of 4.
Mat sincos_table(const PatchGrid& grid, int width);

TokenSequence add_positional(const TokenSequence& seq, const PatchGrid& grid);
// Learned variant: `table` is [P x width].
TokenSequence add_learned_positional(const TokenSequence& seq, const ag::Var& table);

// Puts `cls` ([1 x width]) in front of the sequence.
TokenSequence prepend_cls(const TokenSequence& seq, const ag::Var& cls);

struct BlockPlacement {
  int row = 0;
  int col = 0;
  std::vector<int> added;  // cells first made visible by this block
};

struct MaskDraw {
  MaskSet mask;
  std::vector<BlockPlacement> placements;
  std::vector<int> trimmed;  // cells of the final block dropped to hit the count
};

int visible_count(const PatchGrid& grid, double keep_ratio);

// One clone: block top-left corners drawn uniformly without replacement,
// blocks clipped at the grid edge, until at least round(keep_ratio * P)
// cells are visible; the last block is trimmed at random to the exact count.
MaskDraw sample_inverse_block_mask(const PatchGrid& grid, double keep_ratio,
                                   int block, std::mt19937_64& rng);

std::vector<MaskSet> sample_inverse_block_masks(const PatchGrid& grid,
                                                double keep_ratio, int block,
                                                int n_clones, std::mt19937_64& rng);

void validate(const MaskSet& mask, const PatchGrid& grid);

// Keeps CLS and every token whose position is visible, in sequence order.
TokenSequence drop_masked(const TokenSequence& seq, const MaskSet& mask,
                          const PatchGrid& grid);

// Keeps CLS and every token whose time column is flagged.
TokenSequence drop_region_tokens(const TokenSequence& seq, const PatchGrid& grid,
                                 const std::vector<bool>& keep_columns);
TokenSequence drop_region_tokens(const TokenSequence& seq, const PatchGrid& grid,
                                 const mix::MixPlan& plan);

nlohmann::json to_json(const MaskSet& mask);
MaskSet mask_from_json(const nlohmann::json& j);

}  // namespace sslam::patch

#endif  // SSLAM_PATCHER_H_

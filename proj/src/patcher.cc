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

#include "sslam/patcher.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace sslam::patch {

PatchGrid grid_for(int frames, int bins) {
  if (frames <= 0 || bins <= 0 || frames % kPatchSize != 0 || bins % kPatchSize != 0)
    throw std::invalid_argument("spectrogram " + std::to_string(frames) + "x" +
                                std::to_string(bins) + " is not divisible by 16");
  return {bins / kPatchSize, frames / kPatchSize};
}

Mat extract_patches(const dsp::LogMelSpectrogram& s) {
  const PatchGrid grid = grid_for(s.frames(), s.bins());
  Mat patches(grid.patches(), kPatchDim);
  for (int c = 0; c < grid.cols; ++c) {
    for (int r = 0; r < grid.rows; ++r) {
      auto out = patches.row(grid.index(r, c));
      for (int t = 0; t < kPatchSize; ++t)
        for (int f = 0; f < kPatchSize; ++f)
          out(t * kPatchSize + f) = s.data(c * kPatchSize + t, r * kPatchSize + f);
    }
  }
  return patches;
}

TokenSequence patchify(const dsp::LogMelSpectrogram& s, const PatchEmbedding& embed) {
  TokenSequence seq;
  seq.tokens = ag::linear(ag::constant(extract_patches(s)), embed.weight, embed.bias);
  seq.positions.resize(seq.tokens->value.rows());
  std::iota(seq.positions.begin(), seq.positions.end(), 0);
  return seq;
}

Mat sincos_table(const PatchGrid& grid, int width) {
  if (width <= 0 || width % 4 != 0)
    throw std::invalid_argument("sincos_table: width must be a positive multiple of 4");
  const int quarter = width / 4;
  Mat table(grid.patches(), width);
  for (int k = 0; k < grid.patches(); ++k) {
    const double coords[2] = {static_cast<double>(grid.row_of(k)),
                              static_cast<double>(grid.col_of(k))};
    for (int axis = 0; axis < 2; ++axis) {
      for (int i = 0; i < quarter; ++i) {
        const double omega = 1.0 / std::pow(10000.0, static_cast<double>(i) / quarter);
        table(k, axis * 2 * quarter + i) = std::sin(coords[axis] * omega);
        table(k, axis * 2 * quarter + quarter + i) = std::cos(coords[axis] * omega);
      }
    }
  }
  return table;
}

namespace {

Mat table_rows(const TokenSequence& seq, const Mat& table) {
  Mat rows = Mat::Zero(seq.size(), table.cols());
  for (int i = 0; i < seq.size(); ++i) {
    const int p = seq.positions[i];
    if (p == kClsPosition) continue;
    if (p < 0 || p >= table.rows())
      throw std::invalid_argument("positional table smaller than the grid");
    rows.row(i) = table.row(p);
  }
  return rows;
}

}  // namespace

TokenSequence add_positional(const TokenSequence& seq, const PatchGrid& grid) {
  TokenSequence out = seq;
  const Mat table = sincos_table(grid, static_cast<int>(seq.tokens->value.cols()));
  out.tokens = ag::add_const(seq.tokens, table_rows(seq, table));
  return out;
}

TokenSequence add_learned_positional(const TokenSequence& seq, const ag::Var& table) {
  std::vector<int> rows;
  rows.reserve(seq.size());
  for (int p : seq.positions) {
    if (p == kClsPosition)
      throw std::invalid_argument("add_learned_positional: apply before CLS");
    rows.push_back(p);
  }
  TokenSequence out = seq;
  out.tokens = ag::add(seq.tokens, ag::gather_rows(table, rows));
  return out;
}

TokenSequence prepend_cls(const TokenSequence& seq, const ag::Var& cls) {
  if (seq.cls_present) throw std::invalid_argument("prepend_cls: CLS already present");
  TokenSequence out;
  out.tokens = ag::concat_rows(cls, seq.tokens);
  out.positions.reserve(seq.positions.size() + 1);
  out.positions.push_back(kClsPosition);
  out.positions.insert(out.positions.end(), seq.positions.begin(), seq.positions.end());
  out.cls_present = true;
  return out;
}

int visible_count(const PatchGrid& grid, double keep_ratio) {
  if (!(keep_ratio > 0.0 && keep_ratio < 1.0))
    throw std::invalid_argument("keep_ratio must lie in (0, 1)");
  return static_cast<int>(std::lround(keep_ratio * grid.patches()));
}

MaskDraw sample_inverse_block_mask(const PatchGrid& grid, double keep_ratio, int block,
                                   std::mt19937_64& rng) {
  const int target = visible_count(grid, keep_ratio);
  if (target < 1) throw std::invalid_argument("inverse block mask: no visible patches");
  if (block < 1) throw std::invalid_argument("inverse block mask: block < 1");
  const int n = grid.patches();

  std::vector<int> corners(n);
  std::iota(corners.begin(), corners.end(), 0);
  std::vector<char> visible(n, 0);
  int count = 0;
  MaskDraw draw;
  for (int i = 0; i < n && count < target; ++i) {
    // Partial Fisher-Yates: corners[i] becomes a uniformly drawn unused corner.
    const int j = std::uniform_int_distribution<int>(i, n - 1)(rng);
    std::swap(corners[i], corners[j]);
    BlockPlacement placement{grid.row_of(corners[i]), grid.col_of(corners[i]), {}};
    for (int c = placement.col; c < std::min(grid.cols, placement.col + block); ++c) {
      for (int r = placement.row; r < std::min(grid.rows, placement.row + block); ++r) {
        const int k = grid.index(r, c);
        if (!visible[k]) {
          visible[k] = 1;
          placement.added.push_back(k);
          ++count;
        }
      }
    }
    draw.placements.push_back(std::move(placement));
  }

  if (count > target) {
    auto& added = draw.placements.back().added;
    std::shuffle(added.begin(), added.end(), rng);
    while (count > target) {
      const int k = added.back();
      added.pop_back();
      visible[k] = 0;
      draw.trimmed.push_back(k);
      --count;
    }
    std::sort(added.begin(), added.end());
    std::sort(draw.trimmed.begin(), draw.trimmed.end());
  }

  for (int k = 0; k < n; ++k) {
    (visible[k] ? draw.mask.visible : draw.mask.masked).push_back(k);
  }
  return draw;
}

std::vector<MaskSet> sample_inverse_block_masks(const PatchGrid& grid, double keep_ratio,
                                                int block, int n_clones,
                                                std::mt19937_64& rng) {
  if (n_clones < 1) throw std::invalid_argument("n_clones must be >= 1");
  std::vector<MaskSet> masks;
  masks.reserve(n_clones);
  for (int c = 0; c < n_clones; ++c) {
    MaskSet m = sample_inverse_block_mask(grid, keep_ratio, block, rng).mask;
    m.clone_id = c;
    masks.push_back(std::move(m));
  }
  return masks;
}

void validate(const MaskSet& mask, const PatchGrid& grid) {
  if (mask.visible.empty()) throw std::invalid_argument("mask: no visible patches");
  if (static_cast<int>(mask.visible.size() + mask.masked.size()) != grid.patches())
    throw std::invalid_argument("mask: visible + masked != grid size");
  std::vector<char> seen(grid.patches(), 0);
  for (const auto* set : {&mask.visible, &mask.masked}) {
    for (size_t i = 0; i < set->size(); ++i) {
      const int k = (*set)[i];
      if (k < 0 || k >= grid.patches()) throw std::invalid_argument("mask: index out of grid");
      if (i > 0 && (*set)[i - 1] >= k) throw std::invalid_argument("mask: indices not sorted");
      if (seen[k]++) throw std::invalid_argument("mask: visible and masked overlap");
    }
  }
}

namespace {

TokenSequence keep_rows(const TokenSequence& seq, const std::vector<int>& rows) {
  TokenSequence out;
  out.cls_present = seq.cls_present;
  out.tokens = ag::gather_rows(seq.tokens, rows);
  out.positions.reserve(rows.size());
  for (int r : rows) out.positions.push_back(seq.positions[r]);
  return out;
}

}  // namespace

TokenSequence drop_masked(const TokenSequence& seq, const MaskSet& mask,
                          const PatchGrid& grid) {
  validate(mask, grid);
  std::vector<char> is_visible(grid.patches(), 0);
  for (int k : mask.visible) is_visible[k] = 1;
  std::vector<int> rows;
  rows.reserve(mask.visible.size() + 1);
  size_t kept_patches = 0;
  for (int i = 0; i < seq.size(); ++i) {
    const int p = seq.positions[i];
    if (p == kClsPosition) {
      rows.push_back(i);
      continue;
    }
    if (p < 0 || p >= grid.patches())
      throw std::invalid_argument("drop_masked: token position outside the grid");
    if (is_visible[p]) {
      rows.push_back(i);
      ++kept_patches;
    }
  }
  if (kept_patches != mask.visible.size())
    throw std::invalid_argument("drop_masked: sequence lacks visible positions of the mask");
  return keep_rows(seq, rows);
}

TokenSequence drop_region_tokens(const TokenSequence& seq, const PatchGrid& grid,
                                 const std::vector<bool>& keep_columns) {
  if (static_cast<int>(keep_columns.size()) != grid.cols)
    throw std::invalid_argument("drop_region_tokens: column flags != grid columns");
  std::vector<int> rows;
  for (int i = 0; i < seq.size(); ++i) {
    const int p = seq.positions[i];
    if (p == kClsPosition) {
      rows.push_back(i);
      continue;
    }
    if (p < 0 || p >= grid.patches())
      throw std::invalid_argument("drop_region_tokens: token position outside the grid");
    if (keep_columns[grid.col_of(p)]) rows.push_back(i);
  }
  return keep_rows(seq, rows);
}

TokenSequence drop_region_tokens(const TokenSequence& seq, const PatchGrid& grid,
                                 const mix::MixPlan& plan) {
  if (plan.total_frames / kPatchSize != grid.cols)
    throw std::invalid_argument("drop_region_tokens: plan length != grid length");
  return drop_region_tokens(seq, grid, mix::mixed_columns(plan, grid.cols));
}

nlohmann::json to_json(const MaskSet& mask) {
  return {{"clone_id", mask.clone_id}, {"visible", mask.visible}, {"masked", mask.masked}};
}

MaskSet mask_from_json(const nlohmann::json& j) {
  MaskSet m;
  m.clone_id = j.at("clone_id").get<int>();
  m.visible = j.at("visible").get<std::vector<int>>();
  m.masked = j.at("masked").get<std::vector<int>>();
  return m;
}

}  // namespace sslam::patch

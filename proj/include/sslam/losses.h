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

// Training objectives.
//
// Every squared error is a mean over all of its elements, feature dimension
// included. Per-item inputs are indexed [item][clone].

#ifndef SSLAM_LOSSES_H_
#define SSLAM_LOSSES_H_

#include <array>
#include <span>
#include <string>
#include <vector>

#include "sslam/autograd.h"
#include "sslam/mixer.h"
#include "sslam/model.h"
#include "sslam/patcher.h"

namespace sslam::loss {

enum Term { kGlobalUnmixed = 0, kLocalUnmixed, kGlobalMixed, kLocalMixed, kSrl };
inline constexpr int kNumTerms = 5;

// Metrics-log key for a term, e.g. "loss_g_um".
const char* term_key(int term);

struct LossBundle {
  std::array<double, kNumTerms> values{};
  std::array<double, kNumTerms> weights{1.0, 1.0, 1.0, 1.0, 1.0};
  std::array<bool, kNumTerms> enabled{};
  double total = 0.0;
  bool srl_degenerate = false;

  int populated() const;
};

// Weighted sum of the enabled terms. Throws on a negative weight.
double combine(const LossBundle& bundle);
void validate_weights(const std::array<double, kNumTerms>& weights);

enum class SrlAggregation { kAverage, kMax };
std::string to_string(SrlAggregation a);
SrlAggregation parse_srl_aggregation(const std::string& name);

template <typename T>
using PerClone = std::vector<std::vector<T>>;

// cls_hats[i][j] is [1 x width]; z_cls[i] the pooled teacher target.
ag::Var global_loss(const PerClone<ag::Var>& cls_hats, const std::vector<RowVec>& z_cls);

// y_hats[i][j] holds one row per masks[i][j].masked entry; targets[i] is
// looked up by grid position.
ag::Var local_loss(const PerClone<ag::Var>& y_hats,
                   const std::vector<const model::Targets*>& targets,
                   const PerClone<patch::MaskSet>& masks);

struct SrlResult {
  ag::Var loss;
  long count = 0;  // (item, clone, token) triples that entered the mean
  bool degenerate = false;
};

// Restricted to masked tokens whose time column is flagged in
// mixed_cols[i]. z_s1 holds the overlay's region-only teacher tokens, z_s2
// the base's full-clip teacher tokens.
SrlResult srl_loss(const PerClone<ag::Var>& y_hat_mixed,
                   const std::vector<const model::Targets*>& z_s1,
                   const std::vector<const model::Targets*>& z_s2,
                   const PerClone<patch::MaskSet>& masks,
                   const std::vector<std::vector<bool>>& mixed_cols,
                   const patch::PatchGrid& grid,
                   SrlAggregation aggregation = SrlAggregation::kAverage);
SrlResult srl_loss(const PerClone<ag::Var>& y_hat_mixed,
                   const std::vector<const model::Targets*>& z_s1,
                   const std::vector<const model::Targets*>& z_s2,
                   const PerClone<patch::MaskSet>& masks,
                   const std::vector<mix::MixPlan>& plans, const patch::PatchGrid& grid,
                   SrlAggregation aggregation = SrlAggregation::kAverage);

struct MixitResult {
  ag::Var loss;
  unsigned assignment = 0;  // bit k set: component k goes to source 2
};

inline constexpr int kMixitMaxComponents = 12;

// Minimum over the 2^K binary assignments of MSE(z_s1, mean of its
// components) + MSE(z_s2, mean of its components). A source with no
// components predicts zero. Ties resolve to the smallest assignment.
MixitResult mixit_loss(const Mat& z_s1, const Mat& z_s2, std::span<const ag::Var> y_hat_k);

}  // namespace sslam::loss

#endif  // SSLAM_LOSSES_H_

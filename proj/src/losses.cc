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

#include "sslam/losses.h"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace sslam::loss {

namespace {

constexpr const char* kKeys[kNumTerms] = {"loss_g_um", "loss_l_um", "loss_g_m", "loss_l_m",
                                          "loss_srl"};

// Grid position -> row of t.z, or -1.
std::vector<int> row_lookup(const model::Targets& t, int n_positions) {
  std::vector<int> rows(n_positions, -1);
  for (size_t r = 0; r < t.positions.size(); ++r) {
    const int k = t.positions[r];
    if (k >= 0 && k < n_positions) rows[k] = static_cast<int>(r);
  }
  return rows;
}

int max_position(const PerClone<patch::MaskSet>& masks) {
  int hi = 0;
  for (const auto& clones : masks)
    for (const auto& m : clones) {
      if (!m.masked.empty()) hi = std::max(hi, m.masked.back() + 1);
      if (!m.visible.empty()) hi = std::max(hi, m.visible.back() + 1);
    }
  return hi;
}

void require_items(size_t a, size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": item counts differ");
  if (a == 0) throw std::invalid_argument(std::string(what) + ": empty batch");
}

}  // namespace

const char* term_key(int term) {
  if (term < 0 || term >= kNumTerms) throw std::out_of_range("term_key");
  return kKeys[term];
}

int LossBundle::populated() const {
  int n = 0;
  for (bool e : enabled) n += e ? 1 : 0;
  return n;
}

void validate_weights(const std::array<double, kNumTerms>& weights) {
  for (int i = 0; i < kNumTerms; ++i)
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i]))
      throw std::invalid_argument(std::string("negative or non-finite weight for ") + kKeys[i]);
}

double combine(const LossBundle& bundle) {
  validate_weights(bundle.weights);
  double total = 0.0;
  for (int i = 0; i < kNumTerms; ++i)
    if (bundle.enabled[i]) total += bundle.weights[i] * bundle.values[i];
  return total;
}

std::string to_string(SrlAggregation a) { return a == SrlAggregation::kMax ? "max" : "average"; }

SrlAggregation parse_srl_aggregation(const std::string& name) {
  if (name == "average" || name == "avg" || name == "mean") return SrlAggregation::kAverage;
  if (name == "max") return SrlAggregation::kMax;
  throw std::invalid_argument("unknown SRL aggregation '" + name + "'");
}

ag::Var global_loss(const PerClone<ag::Var>& cls_hats, const std::vector<RowVec>& z_cls) {
  require_items(cls_hats.size(), z_cls.size(), "global_loss");
  std::vector<ag::Var> terms;
  double elements = 0.0;
  for (size_t i = 0; i < cls_hats.size(); ++i) {
    if (cls_hats[i].empty()) throw std::invalid_argument("global_loss: n_MC = 0");
    for (const auto& c : cls_hats[i]) {
      if (c->value.rows() != 1 || c->value.cols() != z_cls[i].cols())
        throw std::invalid_argument("global_loss: CLS shape differs from target");
      terms.push_back(ag::sq_err_sum(c, z_cls[i]));
      elements += static_cast<double>(z_cls[i].cols());
    }
  }
  const std::vector<double> w(terms.size(), 1.0 / elements);
  return ag::weighted_sum(terms, w);
}

ag::Var local_loss(const PerClone<ag::Var>& y_hats,
                   const std::vector<const model::Targets*>& targets,
                   const PerClone<patch::MaskSet>& masks) {
  require_items(y_hats.size(), targets.size(), "local_loss");
  require_items(y_hats.size(), masks.size(), "local_loss");
  const int n_pos = max_position(masks);
  std::vector<ag::Var> terms;
  double elements = 0.0;
  for (size_t i = 0; i < y_hats.size(); ++i) {
    if (y_hats[i].size() != masks[i].size())
      throw std::invalid_argument("local_loss: clone counts differ");
    if (y_hats[i].empty()) throw std::invalid_argument("local_loss: n_MC = 0");
    const model::Targets& t = *targets[i];
    const std::vector<int> lookup = row_lookup(t, n_pos);
    for (size_t j = 0; j < y_hats[i].size(); ++j) {
      const Mat& y = y_hats[i][j]->value;
      const auto& masked = masks[i][j].masked;
      if (y.rows() != static_cast<Eigen::Index>(masked.size()) || y.cols() != t.z.cols())
        throw std::invalid_argument("local_loss: predictions misaligned with the mask");
      Mat target(y.rows(), y.cols());
      for (size_t r = 0; r < masked.size(); ++r) {
        const int row = lookup[masked[r]];
        if (row < 0) throw std::invalid_argument("local_loss: target lacks a masked position");
        target.row(r) = t.z.row(row);
      }
      terms.push_back(ag::sq_err_sum(y_hats[i][j], target));
      elements += static_cast<double>(y.size());
    }
  }
  if (elements == 0.0) throw std::invalid_argument("local_loss: no masked tokens");
  const std::vector<double> w(terms.size(), 1.0 / elements);
  return ag::weighted_sum(terms, w);
}

SrlResult srl_loss(const PerClone<ag::Var>& y_hat_mixed,
                   const std::vector<const model::Targets*>& z_s1,
                   const std::vector<const model::Targets*>& z_s2,
                   const PerClone<patch::MaskSet>& masks,
                   const std::vector<std::vector<bool>>& mixed_cols,
                   const patch::PatchGrid& grid, SrlAggregation aggregation) {
  require_items(y_hat_mixed.size(), z_s1.size(), "srl_loss");
  require_items(y_hat_mixed.size(), z_s2.size(), "srl_loss");
  require_items(y_hat_mixed.size(), masks.size(), "srl_loss");
  require_items(y_hat_mixed.size(), mixed_cols.size(), "srl_loss");
  const int n_pos = grid.patches();
  std::vector<ag::Var> terms;
  SrlResult out;
  double elements = 0.0;
  for (size_t i = 0; i < y_hat_mixed.size(); ++i) {
    if (y_hat_mixed[i].size() != masks[i].size())
      throw std::invalid_argument("srl_loss: clone counts differ");
    if (static_cast<int>(mixed_cols[i].size()) != grid.cols)
      throw std::invalid_argument("srl_loss: column flags != grid columns");
    const std::vector<int> lookup1 = row_lookup(*z_s1[i], n_pos);
    const std::vector<int> lookup2 = row_lookup(*z_s2[i], n_pos);
    for (size_t j = 0; j < y_hat_mixed[i].size(); ++j) {
      const auto& masked = masks[i][j].masked;
      const Mat& y = y_hat_mixed[i][j]->value;
      if (y.rows() != static_cast<Eigen::Index>(masked.size()))
        throw std::invalid_argument("srl_loss: predictions misaligned with the mask");
      std::vector<int> rows;
      for (size_t r = 0; r < masked.size(); ++r)
        if (mixed_cols[i][grid.col_of(masked[r])]) rows.push_back(static_cast<int>(r));
      if (rows.empty()) continue;
      Mat target(static_cast<Eigen::Index>(rows.size()), y.cols());
      for (size_t r = 0; r < rows.size(); ++r) {
        const int k = masked[rows[r]];
        const int r1 = lookup1[k];
        const int r2 = lookup2[k];
        if (r1 < 0 || r2 < 0)
          throw std::invalid_argument("srl_loss: teacher tokens missing for a region position");
        const auto a = z_s1[i]->z.row(r1);
        const auto b = z_s2[i]->z.row(r2);
        if (a.cols() != y.cols() || b.cols() != y.cols())
          throw std::invalid_argument("srl_loss: target width differs from predictions");
        if (aggregation == SrlAggregation::kMax) {
          target.row(r) = a.cwiseMax(b);
        } else {
          target.row(r) = 0.5 * (b + a);
        }
      }
      terms.push_back(ag::sq_err_sum(ag::gather_rows(y_hat_mixed[i][j], rows), target));
      elements += static_cast<double>(target.size());
      out.count += static_cast<long>(rows.size());
    }
  }
  if (terms.empty()) {
    out.loss = ag::constant(Mat::Zero(1, 1));
    out.degenerate = true;
    return out;
  }
  const std::vector<double> w(terms.size(), 1.0 / elements);
  out.loss = ag::weighted_sum(terms, w);
  return out;
}

SrlResult srl_loss(const PerClone<ag::Var>& y_hat_mixed,
                   const std::vector<const model::Targets*>& z_s1,
                   const std::vector<const model::Targets*>& z_s2,
                   const PerClone<patch::MaskSet>& masks,
                   const std::vector<mix::MixPlan>& plans, const patch::PatchGrid& grid,
                   SrlAggregation aggregation) {
  std::vector<std::vector<bool>> cols;
  cols.reserve(plans.size());
  for (const auto& p : plans) cols.push_back(mix::mixed_columns(p, grid.cols));
  return srl_loss(y_hat_mixed, z_s1, z_s2, masks, cols, grid, aggregation);
}

MixitResult mixit_loss(const Mat& z_s1, const Mat& z_s2, std::span<const ag::Var> y_hat_k) {
  const int k = static_cast<int>(y_hat_k.size());
  if (k < 2 || k > kMixitMaxComponents)
    throw std::invalid_argument("mixit_loss: K must lie in [2, 12], got " + std::to_string(k));
  if (z_s1.rows() != z_s2.rows() || z_s1.cols() != z_s2.cols())
    throw std::invalid_argument("mixit_loss: source shapes differ");
  for (const auto& y : y_hat_k)
    if (y->value.rows() != z_s1.rows() || y->value.cols() != z_s1.cols())
      throw std::invalid_argument("mixit_loss: component shape differs from sources");
  const double n = static_cast<double>(z_s1.size());

  auto value_of = [&](unsigned a) {
    double total = 0.0;
    for (int src = 0; src < 2; ++src) {
      Mat pred = Mat::Zero(z_s1.rows(), z_s1.cols());
      int used = 0;
      for (int c = 0; c < k; ++c) {
        if (((a >> c) & 1u) == static_cast<unsigned>(src)) {
          pred += y_hat_k[c]->value;
          ++used;
        }
      }
      if (used > 0) pred /= used;
      total += ((src == 0 ? z_s1 : z_s2) - pred).squaredNorm() / n;
    }
    return total;
  };

  unsigned best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (unsigned a = 0; a < (1u << k); ++a) {
    const double v = value_of(a);
    if (v < best_value) {
      best_value = v;
      best = a;
    }
  }

  std::vector<ag::Var> terms;
  std::vector<double> weights;
  for (int src = 0; src < 2; ++src) {
    std::vector<ag::Var> parts;
    for (int c = 0; c < k; ++c)
      if (((best >> c) & 1u) == static_cast<unsigned>(src)) parts.push_back(y_hat_k[c]);
    const Mat& target = src == 0 ? z_s1 : z_s2;
    ag::Var pred = parts.empty() ? ag::constant(Mat::Zero(target.rows(), target.cols()))
                                 : ag::average(parts);
    terms.push_back(ag::sq_err_sum(pred, target));
    weights.push_back(1.0 / n);
  }
  return {ag::weighted_sum(terms, weights), best};
}

}  // namespace sslam::loss

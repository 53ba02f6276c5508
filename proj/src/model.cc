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

#include "sslam/model.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sslam::model {

namespace {

std::string block(int i) { return "encoder.blocks." + std::to_string(i) + "."; }
std::string dblock(int i) { return "decoder.blocks." + std::to_string(i) + "."; }

Mat trunc_normal(int rows, int cols, double std, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::max(std, 1e-300));
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    double v;
    do {
      v = dist(rng);
    } while (std::abs(v) > 2.0 * std);
    m.data()[i] = v;
  }
  return m;
}

}  // namespace

void EncoderConfig::validate() const {
  if (depth < 1 || width < 4 || heads < 1 || mlp_ratio <= 0 || decoder_layers < 0)
    throw std::invalid_argument("encoder config: non-positive dimension");
  if (width % heads != 0)
    throw std::invalid_argument("encoder config: width not divisible by heads");
  if (width % 4 != 0)
    throw std::invalid_argument("encoder config: width must be a multiple of 4");
}

void ParamStore::add(const std::string& name, Mat value, bool trainable) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter " + name);
  index_[name] = entries_.size();
  entries_.emplace_back(name, trainable ? ag::parameter(std::move(value))
                                        : ag::constant(std::move(value)));
}

const ag::Var& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("unknown parameter " + name);
  return entries_[it->second].second;
}

size_t ParamStore::scalar_count() const {
  size_t n = 0;
  for (const auto& [name, v] : entries_) n += static_cast<size_t>(v->value.size());
  return n;
}

ParamStore ParamStore::copy(bool trainable, const std::string& prefix) const {
  ParamStore out;
  for (const auto& [name, v] : entries_)
    if (name.rfind(prefix, 0) == 0) out.add(name, v->value, trainable);
  return out;
}

void ParamStore::zero_grad() {
  for (auto& [name, v] : entries_) v->grad.resize(0, 0);
}

bool ParamStore::operator==(const ParamStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.first != b.first) return false;
    if (a.second->value.rows() != b.second->value.rows() ||
        a.second->value.cols() != b.second->value.cols())
      return false;
    if (a.second->value != b.second->value) return false;
  }
  return true;
}

ParamStore init_student(const EncoderConfig& cfg, const patch::PatchGrid& grid,
                        std::mt19937_64& rng) {
  cfg.validate();
  const int w = cfg.width;
  const int h = cfg.mlp_hidden();
  const double s = cfg.init_std;
  ParamStore p;
  p.add("encoder.patch_embed.weight", trunc_normal(patch::kPatchDim, w, s, rng));
  p.add("encoder.patch_embed.bias", Mat::Zero(1, w));
  p.add("encoder.cls_token", trunc_normal(1, w, s, rng));
  if (cfg.positional == PositionalEncoding::kLearned)
    p.add("encoder.pos_embed", trunc_normal(grid.patches(), w, s, rng));
  for (int i = 0; i < cfg.depth; ++i) {
    const std::string b = block(i);
    p.add(b + "norm1.weight", Mat::Ones(1, w));
    p.add(b + "norm1.bias", Mat::Zero(1, w));
    p.add(b + "attn.qkv.weight", trunc_normal(w, 3 * w, s, rng));
    p.add(b + "attn.qkv.bias", Mat::Zero(1, 3 * w));
    p.add(b + "attn.proj.weight", trunc_normal(w, w, s, rng));
    p.add(b + "attn.proj.bias", Mat::Zero(1, w));
    p.add(b + "norm2.weight", Mat::Ones(1, w));
    p.add(b + "norm2.bias", Mat::Zero(1, w));
    p.add(b + "mlp.fc1.weight", trunc_normal(w, h, s, rng));
    p.add(b + "mlp.fc1.bias", Mat::Zero(1, h));
    p.add(b + "mlp.fc2.weight", trunc_normal(h, w, s, rng));
    p.add(b + "mlp.fc2.bias", Mat::Zero(1, w));
  }
  for (int i = 0; i < cfg.decoder_layers; ++i) {
    const std::string b = dblock(i);
    p.add(b + "conv.weight", trunc_normal(9 * w, w, s, rng));
    p.add(b + "conv.bias", Mat::Zero(1, w));
    p.add(b + "norm.weight", Mat::Ones(1, w));
    p.add(b + "norm.bias", Mat::Zero(1, w));
  }
  p.add("decoder.head.weight", trunc_normal(w, w, s, rng));
  p.add("decoder.head.bias", Mat::Zero(1, w));
  return p;
}

ParamStore make_teacher(const ParamStore& student) {
  return student.copy(/*trainable=*/false, "encoder.");
}

void zero_residual_branches(ParamStore& params, const EncoderConfig& cfg) {
  for (int i = 0; i < cfg.depth; ++i) {
    for (const char* n : {"attn.proj.weight", "attn.proj.bias", "mlp.fc2.weight",
                          "mlp.fc2.bias"})
      params.get(block(i) + n)->value.setZero();
  }
}

void identity_decoder(ParamStore& params, const EncoderConfig& cfg) {
  for (int i = 0; i < cfg.decoder_layers; ++i) {
    params.get(dblock(i) + "conv.weight")->value.setZero();
    params.get(dblock(i) + "conv.bias")->value.setZero();
  }
  params.get("decoder.head.weight")->value.setIdentity();
  params.get("decoder.head.bias")->value.setZero();
}

patch::TokenSequence embed(const dsp::LogMelSpectrogram& s, const ParamStore& params,
                           const EncoderConfig& cfg) {
  const patch::PatchGrid grid = patch::grid_for(s.frames(), s.bins());
  patch::PatchEmbedding pe{params.get("encoder.patch_embed.weight"),
                           params.get("encoder.patch_embed.bias")};
  patch::TokenSequence seq = patch::patchify(s, pe);
  if (seq.tokens->value.cols() != cfg.width)
    throw std::invalid_argument("embed: patch embedding width != model width");
  if (cfg.positional == PositionalEncoding::kLearned)
    return patch::add_learned_positional(seq, params.get("encoder.pos_embed"));
  return patch::add_positional(seq, grid);
}

patch::TokenSequence with_cls(const patch::TokenSequence& seq, const ParamStore& params) {
  return patch::prepend_cls(seq, params.get("encoder.cls_token"));
}

ag::Var encode(const ag::Var& x, const ParamStore& params, const EncoderConfig& cfg,
               std::vector<Mat>* layers, int n_layers) {
  if (x->value.cols() != cfg.width)
    throw std::invalid_argument("encoder: token width " +
                                std::to_string(x->value.cols()) + " != model width " +
                                std::to_string(cfg.width));
  const int depth = n_layers < 0 ? cfg.depth : std::min(n_layers, cfg.depth);
  ag::Var h = x;
  for (int i = 0; i < depth; ++i) {
    const std::string b = block(i);
    ag::Var n1 = ag::layer_norm(h, params.get(b + "norm1.weight"),
                                params.get(b + "norm1.bias"), cfg.ln_eps);
    ag::Var qkv = ag::linear(n1, params.get(b + "attn.qkv.weight"),
                             params.get(b + "attn.qkv.bias"));
    ag::Var att = ag::self_attention(qkv, cfg.heads);
    h = ag::add(h, ag::linear(att, params.get(b + "attn.proj.weight"),
                              params.get(b + "attn.proj.bias")));
    ag::Var n2 = ag::layer_norm(h, params.get(b + "norm2.weight"),
                                params.get(b + "norm2.bias"), cfg.ln_eps);
    ag::Var m = ag::gelu(ag::linear(n2, params.get(b + "mlp.fc1.weight"),
                                    params.get(b + "mlp.fc1.bias")));
    h = ag::add(h, ag::linear(m, params.get(b + "mlp.fc2.weight"),
                              params.get(b + "mlp.fc2.bias")));
    if (layers) layers->push_back(h->value);
  }
  return h;
}

StudentOutputs student_forward(const patch::TokenSequence& seq, const ParamStore& params,
                               const EncoderConfig& cfg) {
  if (!seq.cls_present || seq.positions.empty() ||
      seq.positions.front() != patch::kClsPosition)
    throw std::invalid_argument("student_forward: sequence needs a leading CLS token");
  ag::Var out = encode(seq.tokens, params, cfg);
  StudentOutputs so;
  so.cls = ag::slice_rows(out, 0, 1);
  so.tokens = ag::slice_rows(out, 1, seq.size() - 1);
  so.positions.assign(seq.positions.begin() + 1, seq.positions.end());
  return so;
}

ag::Var decode(const StudentOutputs& visible, const patch::MaskSet& mask,
               const patch::PatchGrid& grid, const ParamStore& params,
               const EncoderConfig& cfg, std::mt19937_64& rng, Mat* filler_out) {
  patch::validate(mask, grid);
  if (visible.positions != mask.visible)
    throw std::invalid_argument("decode: visible tokens do not match the mask");
  std::normal_distribution<double> dist(0.0, cfg.filler_std);
  Mat filler(grid.patches(), cfg.width);
  for (Eigen::Index i = 0; i < filler.size(); ++i) filler.data()[i] = dist(rng);
  for (int k : mask.visible) filler.row(k).setZero();

  ag::Var x = ag::scatter_rows(visible.tokens, mask.visible, filler);
  for (int i = 0; i < cfg.decoder_layers; ++i) {
    const std::string b = dblock(i);
    ag::Var y = ag::conv3x3_grid(x, params.get(b + "conv.weight"),
                                 params.get(b + "conv.bias"), grid.rows, grid.cols);
    y = ag::layer_norm(y, params.get(b + "norm.weight"), params.get(b + "norm.bias"),
                       cfg.ln_eps);
    x = ag::add(x, ag::gelu(y));
  }
  ag::Var out = ag::linear(x, params.get("decoder.head.weight"),
                           params.get("decoder.head.bias"));
  if (filler_out) *filler_out = std::move(filler);
  return ag::gather_rows(out, mask.masked);
}

LayerOutputs teacher_forward(const patch::TokenSequence& seq, const ParamStore& teacher,
                             const EncoderConfig& cfg) {
  std::vector<Mat> layers;
  layers.reserve(cfg.depth);
  // Rebind the sequence to a constant so no graph is recorded even when the
  // tokens were produced from trainable leaves.
  encode(ag::constant(seq.tokens->value), teacher, cfg, &layers);

  std::vector<int> rows;
  LayerOutputs lo;
  for (int i = 0; i < seq.size(); ++i) {
    if (seq.positions[i] == patch::kClsPosition) continue;
    rows.push_back(i);
    lo.positions.push_back(seq.positions[i]);
  }
  for (auto& l : layers) {
    Mat patch_rows(static_cast<Eigen::Index>(rows.size()), l.cols());
    for (size_t r = 0; r < rows.size(); ++r) patch_rows.row(r) = l.row(rows[r]);
    lo.layers.push_back(std::move(patch_rows));
  }
  return lo;
}

int Targets::row_of(int k) const {
  auto it = std::find(positions.begin(), positions.end(), k);
  return it == positions.end() ? -1 : static_cast<int>(it - positions.begin());
}

Mat standardize_rows(const Mat& x, double eps) {
  Mat out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    out.row(i) = (x.row(i).array() - mu) / std::sqrt(var + eps);
  }
  return out;
}

Targets build_targets(const LayerOutputs& lo, int top_k, bool normalize_layers) {
  const int depth = static_cast<int>(lo.layers.size());
  if (top_k < 1 || top_k > depth)
    throw std::invalid_argument("build_targets: top_k " + std::to_string(top_k) +
                                " outside [1, " + std::to_string(depth) + "]");
  Targets t;
  t.positions = lo.positions;
  t.z = Mat::Zero(lo.layers.back().rows(), lo.layers.back().cols());
  for (int l = depth - top_k; l < depth; ++l) {
    if (lo.layers[l].rows() != t.z.rows() || lo.layers[l].cols() != t.z.cols())
      throw std::invalid_argument("build_targets: layers differ in shape");
    t.z += normalize_layers ? standardize_rows(lo.layers[l]) : lo.layers[l];
  }
  t.z /= static_cast<double>(top_k);
  t.z_cls = t.z.colwise().mean();
  return t;
}

void ema_update(ParamStore& teacher, const ParamStore& student, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("ema_update: tau outside [0, 1]");
  for (auto& [name, t] : teacher.entries()) {
    const ag::Var& s = student.get(name);
    if (s->value.rows() != t->value.rows() || s->value.cols() != t->value.cols())
      throw std::invalid_argument("ema_update: shape mismatch for " + name);
    t->value = tau * t->value + (1.0 - tau) * s->value;
  }
}

double momentum_schedule(std::int64_t step, std::int64_t total_steps, double tau_start,
                         double tau_end) {
  if (!(tau_start > 0.0 && tau_start <= tau_end && tau_end < 1.0))
    throw std::invalid_argument("momentum_schedule: need 0 < start <= end < 1");
  if (total_steps <= 0 || step >= total_steps) return tau_end;
  if (step <= 0) return tau_start;
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return tau_end - (tau_end - tau_start) * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

}  // namespace sslam::model

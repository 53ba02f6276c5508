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

// Student encoder, convolutional decoder and EMA teacher.
//
// Parameters live in a ParamStore keyed by dotted names. The student owns
// "encoder.*" and "decoder.*"; the teacher is a frozen copy of "encoder.*"
// that only ever changes through ema_update().

#ifndef SSLAM_MODEL_H_
#define SSLAM_MODEL_H_

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sslam/autograd.h"
#include "sslam/dsp.h"
#include "sslam/patcher.h"

namespace sslam::model {

enum class PositionalEncoding { kSinCos, kLearned };

struct EncoderConfig {
  int depth = 4;
  int width = 64;
  int heads = 4;
  double mlp_ratio = 4.0;
  int decoder_layers = 6;
  PositionalEncoding positional = PositionalEncoding::kSinCos;
  double ln_eps = 1e-6;
  double init_std = 0.02;
  double filler_std = 0.02;

  int mlp_hidden() const { return static_cast<int>(width * mlp_ratio); }
  void validate() const;

  static EncoderConfig desk() { return {}; }
  // ViT-Base.
  static EncoderConfig full() { return {12, 768, 12, 4.0}; }
};

class ParamStore {
 public:
  void add(const std::string& name, Mat value, bool trainable = true);
  const ag::Var& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  const std::vector<std::pair<std::string, ag::Var>>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }
  size_t scalar_count() const;

  // Deep copy of every entry whose name starts with `prefix`.
  ParamStore copy(bool trainable, const std::string& prefix = "") const;
  void zero_grad();
  bool operator==(const ParamStore& other) const;  // names and exact values

 private:
  std::vector<std::pair<std::string, ag::Var>> entries_;
  std::unordered_map<std::string, size_t> index_;
};

ParamStore init_student(const EncoderConfig& cfg, const patch::PatchGrid& grid,
                        std::mt19937_64& rng);
// Frozen copy of the student's encoder.
ParamStore make_teacher(const ParamStore& student);

// Zeroes the attention and MLP output projections so every block is the
// identity on its residual stream.
void zero_residual_branches(ParamStore& params, const EncoderConfig& cfg);
// Zero conv taps and an identity head: masked outputs equal their fillers.
void identity_decoder(ParamStore& params, const EncoderConfig& cfg);

// Patch embedding plus positional encoding; no CLS.
patch::TokenSequence embed(const dsp::LogMelSpectrogram& s, const ParamStore& params,
                           const EncoderConfig& cfg);
patch::TokenSequence with_cls(const patch::TokenSequence& seq, const ParamStore& params);

// Runs the pre-norm transformer blocks. When `layers` is non-null it
// receives every block's output value.
ag::Var encode(const ag::Var& x, const ParamStore& params, const EncoderConfig& cfg,
               std::vector<Mat>* layers = nullptr, int n_layers = -1);

struct StudentOutputs {
  ag::Var tokens;              // patch rows only
  ag::Var cls;                 // [1 x width]
  std::vector<int> positions;  // grid position of each row of `tokens`
};

StudentOutputs student_forward(const patch::TokenSequence& seq, const ParamStore& params,
                               const EncoderConfig& cfg);

// Scatters visible tokens onto the grid, fills masked cells with fresh
// N(0, filler_std^2) vectors, runs the conv stack and returns predictions
// for mask.masked in order. `filler_out` receives the filler matrix.
ag::Var decode(const StudentOutputs& visible, const patch::MaskSet& mask,
               const patch::PatchGrid& grid, const ParamStore& params,
               const EncoderConfig& cfg, std::mt19937_64& rng, Mat* filler_out = nullptr);

struct LayerOutputs {
  std::vector<Mat> layers;     // one per block; patch rows only
  std::vector<int> positions;  // grid position of each row
};

LayerOutputs teacher_forward(const patch::TokenSequence& seq, const ParamStore& teacher,
                             const EncoderConfig& cfg);

struct Targets {
  Mat z;                       // [rows x width], aligned with positions
  RowVec z_cls;                // mean of z over rows
  std::vector<int> positions;

  // Row of z holding grid position k, or -1.
  int row_of(int k) const;
};

// Mean of the last top_k layers, each optionally standardized per token
// over the feature dimension first.
Targets build_targets(const LayerOutputs& lo, int top_k, bool normalize_layers);

// Per-row zero mean, unit variance (no affine).
Mat standardize_rows(const Mat& x, double eps = 1e-12);

// teacher <- tau * teacher + (1 - tau) * student over the teacher's names.
void ema_update(ParamStore& teacher, const ParamStore& student, double tau);

// Cosine ramp from tau_start at step 0 to tau_end at total_steps.
double momentum_schedule(std::int64_t step, std::int64_t total_steps, double tau_start,
                         double tau_end);

}  // namespace sslam::model

#endif  // SSLAM_MODEL_H_

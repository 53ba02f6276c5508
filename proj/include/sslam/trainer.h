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

// Two-stage pre-training.
//
// Stage 1 trains on unmixed clips only. Stage 2 starts from a stage-1
// checkpoint and adds, per step, a rolled and partially mixed copy of the
// batch together with the source retention objective.
//
// Every step draws its randomness from an RNG seeded by (seed, step) and
// every epoch shuffles with an RNG seeded by (seed, epoch), so a resumed run
// replays the uninterrupted one exactly.

#ifndef SSLAM_TRAINER_H_
#define SSLAM_TRAINER_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sslam/checkpoint.h"
#include "sslam/config.h"
#include "sslam/dataset.h"
#include "sslam/losses.h"
#include "sslam/mixer.h"
#include "sslam/model.h"
#include "sslam/patcher.h"

namespace sslam::train {

enum class MixExtent { kPartial, kFull };
std::string to_string(MixExtent e);
MixExtent parse_mix_extent(const std::string& name);

struct StageConfig {
  int stage = 1;

  int epochs = 1;
  std::int64_t total_steps = 0;    // 0: epochs * steps per epoch
  std::int64_t warmup_steps = -1;  // -1: an eighth of total_steps
  int batch_size = 4;
  int clone_batch = 4;
  double peak_lr = 5e-4;
  double min_lr = 1e-6;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double adam_eps = 1e-8;
  double grad_clip = 1.0;  // global norm; 0 disables
  std::uint64_t seed = 0;
  double ema_start = 0.999;
  double ema_end = 0.99999;
  std::int64_t checkpoint_every = 0;

  double mask_ratio = 0.8;
  int mask_block = 5;

  MixExtent extent = MixExtent::kPartial;
  mix::MixStrategy strategy = mix::MixStrategy::kSpecMax;

  std::array<double, loss::kNumTerms> loss_weights{1.0, 1.0, 0.0, 0.0, 0.0};
  loss::SrlAggregation srl_aggregation = loss::SrlAggregation::kAverage;
  int top_k_global = 1;  // mixed global targets
  int top_k_local = 0;   // mixed local targets; 0 means depth
  bool normalize_targets = true;

  model::EncoderConfig model;
  data::FrontendConfig frontend;

  bool trains_unmixed() const;
  bool trains_mixed() const;
  bool uses_srl() const;
  int local_top_k() const { return top_k_local > 0 ? top_k_local : model.depth; }
  void validate() const;

  // Desk scale: depth 4, width 64, batch 4, 4 clones.
  static StageConfig desk(int stage);
  // ViT-Base, batch 12, 16 clones in stage 1 and 8 in stage 2.
  static StageConfig full(int stage);
  // Stage-2 variants: "MB-UA", "MB-PMA", "MB-UA-PMA", "SSLAM".
  static StageConfig variant(const std::string& name, StageConfig base);
};

cfg::Table to_table(const StageConfig& c);
// Overrides fields present in `t`; unknown keys raise DataError.
void apply_table(const cfg::Table& t, StageConfig& c);

// Linear warmup from 0 to peak over warmup steps, then cosine decay to min
// at total steps; clamped to min afterwards.
double cosine_lr(std::int64_t step, double peak, double min, std::int64_t warmup,
                 std::int64_t total);

struct OptimizerState {
  std::int64_t t = 0;
  std::map<std::string, Mat> m;
  std::map<std::string, Mat> v;
};

struct AdamWConfig {
  double lr = 0.0;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
};

// Biases, norms, the CLS token and positional tables are not decayed.
bool decays(const std::string& name);

// One decoupled-weight-decay Adam step over every trainable parameter of
// `params`, reading gradients from the parameter nodes (missing gradients
// count as zero). Throws NumericalError naming a parameter with a
// non-finite gradient.
void adamw_step(model::ParamStore& params, OptimizerState& opt, const AdamWConfig& c,
                const std::function<bool(const std::string&)>& decay = decays);

// Scales all gradients so their global L2 norm is at most max_norm; returns
// the norm before clipping.
double clip_grad_norm(model::ParamStore& params, double max_norm);

struct StepStats {
  int unmixed_items = 0;  // student inputs per step, before cloning
  int mixed_items = 0;
  long srl_tokens = 0;
};

struct StepResult {
  loss::LossBundle bundle;
  std::int64_t step = 0;  // 1-based index of the step just taken
  double lr = 0.0;
  double tau = 0.0;
  double grad_norm = 0.0;
  StepStats stats;
};

struct LossGraph {
  ag::Var total;
  loss::LossBundle bundle;
  StepStats stats;
};

class Trainer {
 public:
  Trainer(StageConfig cfg, patch::PatchGrid grid);

  // Takes student and teacher weights from a stage-1 checkpoint.
  void init_from(const ckpt::Checkpoint& c);
  // Restores a checkpoint written by this stage, optimizer included.
  void restore(const ckpt::Checkpoint& c);
  ckpt::Checkpoint checkpoint() const;

  // `waves` is required only for the wave_avg strategy.
  StepResult step(const std::vector<const dsp::LogMelSpectrogram*>& batch,
                  const std::vector<const dsp::Waveform*>& waves = {});

  // Builds the step's loss graph without updating any state. Stage 1
  // ignores mixing settings.
  LossGraph forward_losses(const std::vector<const dsp::LogMelSpectrogram*>& batch,
                           const std::vector<const dsp::Waveform*>& waves,
                           std::mt19937_64& rng) const;

  std::mt19937_64 step_rng(std::int64_t step) const;

  const StageConfig& config() const { return cfg_; }
  const patch::PatchGrid& grid() const { return grid_; }
  model::ParamStore& student() { return student_; }
  const model::ParamStore& student() const { return student_; }
  model::ParamStore& teacher() { return teacher_; }
  const model::ParamStore& teacher() const { return teacher_; }
  OptimizerState& optimizer() { return opt_; }
  std::int64_t steps_done() const { return steps_done_; }
  std::int64_t total_steps() const { return total_steps_; }
  void set_total_steps(std::int64_t n);
  std::int64_t warmup_steps() const;

 private:
  StageConfig cfg_;
  patch::PatchGrid grid_;
  model::ParamStore student_;
  model::ParamStore teacher_;
  OptimizerState opt_;
  std::int64_t steps_done_ = 0;
  std::int64_t total_steps_ = 0;
};

// `step=<n> loss_total=<v> loss_g_um=<v> ... lr=<v> tau=<v>`; terms that
// are not trained print as "na".
std::string metrics_line(const StepResult& r);

struct RunOptions {
  std::filesystem::path run_dir;
  std::optional<std::filesystem::path> init_checkpoint;  // required for stage 2
  std::optional<std::filesystem::path> resume;
  std::int64_t stop_after = -1;  // stop once this many steps are done
  std::function<void(const StepResult&)> on_step;
};

struct RunResult {
  std::filesystem::path final_checkpoint;
  std::int64_t steps_done = 0;
  std::vector<StepResult> history;  // steps taken by this invocation
};

std::int64_t steps_per_epoch(size_t n_clips, int batch_size);
// Clip indices of batch `step` under the seeded per-epoch shuffle.
std::vector<int> batch_indices(std::int64_t step, size_t n_clips, int batch_size,
                               std::uint64_t seed);

// Writes config.toml, metrics.log, checkpoints/step_<n>.ckpt every
// checkpoint_every steps and final.ckpt.
RunResult run_stage(const std::vector<data::Clip>& clips, const StageConfig& cfg,
                    const RunOptions& options);

}  // namespace sslam::train

#endif  // SSLAM_TRAINER_H_

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

#include "sslam/trainer.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "sslam/errors.h"
#include "sslam/rng.h"

namespace sslam::train {

namespace {

std::string positional_name(model::PositionalEncoding p) {
  return p == model::PositionalEncoding::kLearned ? "learned" : "sincos";
}

model::PositionalEncoding parse_positional(const std::string& s) {
  if (s == "sincos") return model::PositionalEncoding::kSinCos;
  if (s == "learned") return model::PositionalEncoding::kLearned;
  throw DataError("unknown positional encoding '" + s + "'");
}

void copy_into(const model::ParamStore& dst, const std::string& prefix,
               const ckpt::Checkpoint& c) {
  for (const auto& [name, v] : dst.entries()) {
    const Mat& src = c.get(prefix + name);
    if (src.rows() != v->value.rows() || src.cols() != v->value.cols())
      throw DataError("checkpoint tensor " + prefix + name + " has shape " +
                      std::to_string(src.rows()) + "x" + std::to_string(src.cols()) +
                      ", model expects " + std::to_string(v->value.rows()) + "x" +
                      std::to_string(v->value.cols()));
    v->value = src;
  }
}

}  // namespace

std::string to_string(MixExtent e) { return e == MixExtent::kFull ? "full" : "partial"; }

MixExtent parse_mix_extent(const std::string& name) {
  if (name == "partial") return MixExtent::kPartial;
  if (name == "full") return MixExtent::kFull;
  throw std::invalid_argument("unknown mix extent '" + name + "'");
}

bool StageConfig::trains_unmixed() const {
  return loss_weights[loss::kGlobalUnmixed] > 0 || loss_weights[loss::kLocalUnmixed] > 0;
}

bool StageConfig::trains_mixed() const {
  return stage == 2 &&
         (loss_weights[loss::kGlobalMixed] > 0 || loss_weights[loss::kLocalMixed] > 0 ||
          loss_weights[loss::kSrl] > 0);
}

bool StageConfig::uses_srl() const { return stage == 2 && loss_weights[loss::kSrl] > 0; }

void StageConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("stage config: " + m); };
  if (stage != 1 && stage != 2) fail("stage must be 1 or 2");
  if (epochs < 1) fail("epochs must be >= 1");
  if (total_steps < 0) fail("steps must be >= 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (clone_batch < 1) fail("clone_batch must be >= 1");
  if (!(peak_lr >= 0 && min_lr >= 0 && min_lr <= peak_lr)) fail("need 0 <= min_lr <= peak_lr");
  if (!(weight_decay >= 0)) fail("weight_decay must be >= 0");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) fail("betas must lie in [0, 1)");
  if (!(adam_eps > 0)) fail("adam_eps must be > 0");
  if (!(grad_clip >= 0)) fail("grad_clip must be >= 0");
  if (!(ema_start > 0 && ema_start <= ema_end && ema_end < 1))
    fail("need 0 < ema_tau_start <= ema_tau_end < 1");
  if (checkpoint_every < 0) fail("checkpoint_every must be >= 0");
  if (!(mask_ratio > 0 && mask_ratio < 1)) fail("mask_ratio must lie in (0, 1)");
  if (mask_block < 1) fail("block_size must be >= 1");
  loss::validate_weights(loss_weights);
  if (stage == 1 && (loss_weights[loss::kGlobalMixed] > 0 ||
                     loss_weights[loss::kLocalMixed] > 0 || loss_weights[loss::kSrl] > 0))
    fail("mixed-audio and SRL weights must be 0 in stage 1");
  if (!trains_unmixed() && !trains_mixed()) fail("every loss weight is 0");
  if (trains_mixed() && batch_size < 2) fail("stage-2 mixing needs batch_size >= 2");
  model.validate();
  if (top_k_global < 1 || top_k_global > model.depth) fail("top_k_global outside [1, depth]");
  if (top_k_local < 0 || top_k_local > model.depth) fail("top_k_local outside [0, depth]");
  if (total_steps > 0 && warmup_steps >= total_steps) fail("warmup_steps must be < steps");
}

StageConfig StageConfig::desk(int stage) {
  StageConfig c;
  c.stage = stage;
  if (stage == 2) {
    c.peak_lr = 5e-5;
    c.loss_weights = {1.0, 1.0, 1.0, 1.0, 1.0};
  }
  return c;
}

StageConfig StageConfig::full(int stage) {
  StageConfig c = desk(stage);
  c.model = model::EncoderConfig::full();
  c.batch_size = 12;
  c.clone_batch = stage == 1 ? 16 : 8;
  c.total_steps = stage == 1 ? 400000 : 200000;
  c.warmup_steps = stage == 1 ? 53000 : 25000;
  c.epochs = stage == 1 ? 10 : 5;
  return c;
}

StageConfig StageConfig::variant(const std::string& name, StageConfig base) {
  base.stage = 2;
  if (name == "MB-UA") {
    base.loss_weights = {1.0, 1.0, 0.0, 0.0, 0.0};
  } else if (name == "MB-PMA") {
    base.loss_weights = {0.0, 0.0, 1.0, 1.0, 0.0};
  } else if (name == "MB-UA-PMA") {
    base.loss_weights = {1.0, 1.0, 1.0, 1.0, 0.0};
  } else if (name == "SSLAM") {
    base.loss_weights = {1.0, 1.0, 1.0, 1.0, 1.0};
  } else {
    throw std::invalid_argument("unknown variant '" + name +
                                "' (MB-UA, MB-PMA, MB-UA-PMA, SSLAM)");
  }
  return base;
}

cfg::Table to_table(const StageConfig& c) {
  cfg::Table t;
  t.set("pretrain.stage", std::int64_t{c.stage});
  t.set("pretrain.epochs", std::int64_t{c.epochs});
  t.set("pretrain.steps", c.total_steps);
  t.set("pretrain.warmup_steps", c.warmup_steps);
  t.set("pretrain.batch_size", std::int64_t{c.batch_size});
  t.set("pretrain.clone_batch", std::int64_t{c.clone_batch});
  t.set("pretrain.peak_learning_rate", c.peak_lr);
  t.set("pretrain.minimum_learning_rate", c.min_lr);
  t.set("pretrain.weight_decay", c.weight_decay);
  t.set("pretrain.optimizer_momentum", std::vector<double>{c.beta1, c.beta2});
  t.set("pretrain.adam_eps", c.adam_eps);
  t.set("pretrain.grad_clip", c.grad_clip);
  t.set("pretrain.seed", static_cast<std::int64_t>(c.seed));
  t.set("pretrain.ema_tau_start", c.ema_start);
  t.set("pretrain.ema_tau_end", c.ema_end);
  t.set("pretrain.checkpoint_every", c.checkpoint_every);

  t.set("model.depth", std::int64_t{c.model.depth});
  t.set("model.width", std::int64_t{c.model.width});
  t.set("model.heads", std::int64_t{c.model.heads});
  t.set("model.mlp_ratio", c.model.mlp_ratio);
  t.set("model.decoder_layers", std::int64_t{c.model.decoder_layers});
  t.set("model.positional", positional_name(c.model.positional));
  t.set("model.filler_std", c.model.filler_std);

  t.set("masking.mask_ratio", c.mask_ratio);
  t.set("masking.block_size", std::int64_t{c.mask_block});

  t.set("mixing.extent", to_string(c.extent));
  t.set("mixing.strategy", mix::to_string(c.strategy));

  t.set("loss.weights", std::vector<double>(c.loss_weights.begin(), c.loss_weights.end()));
  t.set("loss.srl_aggregation", loss::to_string(c.srl_aggregation));
  t.set("loss.top_k_global", std::int64_t{c.top_k_global});
  t.set("loss.top_k_local", std::int64_t{c.top_k_local});
  t.set("loss.normalize_targets", c.normalize_targets);

  t.set("data.sample_rate", std::int64_t{c.frontend.sample_rate});
  t.set("data.clip_seconds", c.frontend.clip_seconds);
  t.set("data.target_frames", std::int64_t{c.frontend.target_frames});
  t.set("data.n_mels", std::int64_t{c.frontend.mel.n_mels});
  t.set("data.mel_scale",
        std::string(c.frontend.mel.scale == dsp::MelScale::kSlaney ? "slaney" : "htk"));
  t.set("data.dataset_mean", c.frontend.stats.mean);
  t.set("data.dataset_std", c.frontend.stats.std);
  return t;
}

void apply_table(const cfg::Table& t, StageConfig& c) {
  const cfg::Table known = to_table(c);
  for (const auto& [key, v] : t.values())
    if (!known.has(key)) throw DataError("unknown config key '" + key + "'");
  auto i32 = [&](const char* k, int fallback) {
    return static_cast<int>(t.get_int(k, fallback));
  };
  c.stage = i32("pretrain.stage", c.stage);
  c.epochs = i32("pretrain.epochs", c.epochs);
  c.total_steps = t.get_int("pretrain.steps", c.total_steps);
  c.warmup_steps = t.get_int("pretrain.warmup_steps", c.warmup_steps);
  c.batch_size = i32("pretrain.batch_size", c.batch_size);
  c.clone_batch = i32("pretrain.clone_batch", c.clone_batch);
  c.peak_lr = t.get_double("pretrain.peak_learning_rate", c.peak_lr);
  c.min_lr = t.get_double("pretrain.minimum_learning_rate", c.min_lr);
  c.weight_decay = t.get_double("pretrain.weight_decay", c.weight_decay);
  const auto betas = t.get_list("pretrain.optimizer_momentum", {c.beta1, c.beta2});
  if (betas.size() != 2) throw DataError("pretrain.optimizer_momentum needs two values");
  c.beta1 = betas[0];
  c.beta2 = betas[1];
  c.adam_eps = t.get_double("pretrain.adam_eps", c.adam_eps);
  c.grad_clip = t.get_double("pretrain.grad_clip", c.grad_clip);
  c.seed = static_cast<std::uint64_t>(
      t.get_int("pretrain.seed", static_cast<std::int64_t>(c.seed)));
  c.ema_start = t.get_double("pretrain.ema_tau_start", c.ema_start);
  c.ema_end = t.get_double("pretrain.ema_tau_end", c.ema_end);
  c.checkpoint_every = t.get_int("pretrain.checkpoint_every", c.checkpoint_every);

  c.model.depth = i32("model.depth", c.model.depth);
  c.model.width = i32("model.width", c.model.width);
  c.model.heads = i32("model.heads", c.model.heads);
  c.model.mlp_ratio = t.get_double("model.mlp_ratio", c.model.mlp_ratio);
  c.model.decoder_layers = i32("model.decoder_layers", c.model.decoder_layers);
  c.model.positional =
      parse_positional(t.get_string("model.positional", positional_name(c.model.positional)));
  c.model.filler_std = t.get_double("model.filler_std", c.model.filler_std);

  c.mask_ratio = t.get_double("masking.mask_ratio", c.mask_ratio);
  c.mask_block = i32("masking.block_size", c.mask_block);

  try {
    c.extent = parse_mix_extent(t.get_string("mixing.extent", to_string(c.extent)));
    c.strategy = mix::parse_mix_strategy(t.get_string("mixing.strategy", mix::to_string(c.strategy)));
    c.srl_aggregation = loss::parse_srl_aggregation(
        t.get_string("loss.srl_aggregation", loss::to_string(c.srl_aggregation)));
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }

  const auto w = t.get_list("loss.weights",
                            std::vector<double>(c.loss_weights.begin(), c.loss_weights.end()));
  if (w.size() != loss::kNumTerms) throw DataError("loss.weights needs five values");
  std::copy(w.begin(), w.end(), c.loss_weights.begin());
  c.top_k_global = i32("loss.top_k_global", c.top_k_global);
  c.top_k_local = i32("loss.top_k_local", c.top_k_local);
  c.normalize_targets = t.get_bool("loss.normalize_targets", c.normalize_targets);

  c.frontend.sample_rate = i32("data.sample_rate", c.frontend.sample_rate);
  c.frontend.clip_seconds = t.get_double("data.clip_seconds", c.frontend.clip_seconds);
  c.frontend.target_frames = i32("data.target_frames", c.frontend.target_frames);
  c.frontend.mel.n_mels = i32("data.n_mels", c.frontend.mel.n_mels);
  const std::string scale = t.get_string("data.mel_scale", "htk");
  if (scale != "htk" && scale != "slaney") throw DataError("data.mel_scale must be htk or slaney");
  c.frontend.mel.scale = scale == "slaney" ? dsp::MelScale::kSlaney : dsp::MelScale::kHtk;
  c.frontend.stats.mean = t.get_double("data.dataset_mean", c.frontend.stats.mean);
  c.frontend.stats.std = t.get_double("data.dataset_std", c.frontend.stats.std);
}

double cosine_lr(std::int64_t step, double peak, double min, std::int64_t warmup,
                 std::int64_t total) {
  if (step < 0) throw std::invalid_argument("cosine_lr: negative step");
  if (warmup > 0 && step < warmup)
    return peak * static_cast<double>(step) / static_cast<double>(warmup);
  if (step >= total) return min;
  const double frac =
      static_cast<double>(step - warmup) / static_cast<double>(total - warmup);
  return min + (peak - min) * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

bool decays(const std::string& name) {
  auto ends_with = [&](const std::string& s) {
    return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
  };
  if (ends_with(".bias") || ends_with("cls_token") || ends_with("pos_embed")) return false;
  return name.find("norm") == std::string::npos;
}

namespace {

void require_finite_grad(const std::string& name, const Mat& g) {
  if (g.size() > 0 && !g.allFinite())
    throw NumericalError("non-finite gradient for parameter " + name);
}

}  // namespace

void adamw_step(model::ParamStore& params, OptimizerState& opt, const AdamWConfig& c,
                const std::function<bool(const std::string&)>& decay) {
  for (const auto& [name, p] : params.entries()) require_finite_grad(name, p->grad);
  ++opt.t;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(opt.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(opt.t));
  for (const auto& [name, p] : params.entries()) {
    if (!p->requires_grad) continue;
    Mat& m = opt.m[name];
    Mat& v = opt.v[name];
    if (m.size() == 0) m = Mat::Zero(p->value.rows(), p->value.cols());
    if (v.size() == 0) v = Mat::Zero(p->value.rows(), p->value.cols());
    if (m.rows() != p->value.rows() || m.cols() != p->value.cols())
      throw std::invalid_argument("adamw_step: moment shape differs for " + name);
    if (p->grad.size() > 0) {
      m = c.beta1 * m + (1.0 - c.beta1) * p->grad;
      v = c.beta2 * v + (1.0 - c.beta2) * p->grad.cwiseAbs2();
    } else {
      m *= c.beta1;
      v *= c.beta2;
    }
    if (c.weight_decay > 0 && decay(name)) p->value *= 1.0 - c.lr * c.weight_decay;
    p->value.array() -=
        c.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.eps);
  }
}

double clip_grad_norm(model::ParamStore& params, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, p] : params.entries()) {
    require_finite_grad(name, p->grad);
    if (p->grad.size() > 0) sq += p->grad.squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (const auto& [name, p] : params.entries())
      if (p->grad.size() > 0) p->grad *= s;
  }
  return norm;
}

Trainer::Trainer(StageConfig cfg, patch::PatchGrid grid)
    : cfg_(std::move(cfg)), grid_(grid), total_steps_(cfg_.total_steps) {
  cfg_.validate();
  std::mt19937_64 rng = make_rng(cfg_.seed, Stream::kInit, 0);
  student_ = model::init_student(cfg_.model, grid_, rng);
  teacher_ = model::make_teacher(student_);
}

void Trainer::set_total_steps(std::int64_t n) {
  if (n < 1) throw std::invalid_argument("total steps must be >= 1");
  if (cfg_.warmup_steps >= n) throw std::invalid_argument("warmup_steps must be < total steps");
  total_steps_ = n;
}

std::int64_t Trainer::warmup_steps() const {
  return cfg_.warmup_steps >= 0 ? cfg_.warmup_steps : total_steps_ / 8;
}

void Trainer::init_from(const ckpt::Checkpoint& c) {
  if (c.stage != 1) throw DataError("initialization checkpoint must come from stage 1");
  copy_into(student_, "student/", c);
  if (c.names_with_prefix("teacher/").empty()) {
    teacher_ = model::make_teacher(student_);
  } else {
    copy_into(teacher_, "teacher/", c);
  }
}

void Trainer::restore(const ckpt::Checkpoint& c) {
  if (c.stage != cfg_.stage)
    throw DataError("cannot resume stage " + std::to_string(cfg_.stage) +
                    " from a stage-" + std::to_string(c.stage) + " checkpoint");
  copy_into(student_, "student/", c);
  copy_into(teacher_, "teacher/", c);
  opt_ = {};
  for (const auto& name : c.names_with_prefix("adam_m/")) {
    if (!student_.contains(name)) throw DataError("optimizer state for unknown parameter " + name);
    opt_.m[name] = c.get("adam_m/" + name);
    opt_.v[name] = c.get("adam_v/" + name);
  }
  try {
    opt_.t = nlohmann::json::parse(c.meta).at("adam_t").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint metadata: ") + e.what());
  }
  steps_done_ = c.step;
}

ckpt::Checkpoint Trainer::checkpoint() const {
  ckpt::Checkpoint c;
  c.stage = cfg_.stage;
  c.step = steps_done_;
  nlohmann::ordered_json meta;
  meta["adam_t"] = opt_.t;
  meta["grid"] = {grid_.rows, grid_.cols};
  meta["total_steps"] = total_steps_;
  meta["config"] = to_table(cfg_).dump();
  c.meta = meta.dump();
  for (const auto& [name, v] : student_.entries()) c.put("student/" + name, v->value);
  for (const auto& [name, v] : teacher_.entries()) c.put("teacher/" + name, v->value);
  for (const auto& [name, m] : opt_.m) c.put("adam_m/" + name, m);
  for (const auto& [name, v] : opt_.v) c.put("adam_v/" + name, v);
  return c;
}

std::mt19937_64 Trainer::step_rng(std::int64_t step) const {
  return make_rng(cfg_.seed, Stream::kStep, static_cast<std::uint64_t>(step));
}

LossGraph Trainer::forward_losses(const std::vector<const dsp::LogMelSpectrogram*>& batch,
                                  const std::vector<const dsp::Waveform*>& waves,
                                  std::mt19937_64& rng) const {
  const int b = static_cast<int>(batch.size());
  if (b < 1) throw std::invalid_argument("empty batch");
  for (const auto* x : batch)
    if (!(patch::grid_for(x->frames(), x->bins()) == grid_))
      throw std::invalid_argument("batch item does not match the trainer's patch grid");

  const auto& w = cfg_.loss_weights;
  const auto& mc = cfg_.model;
  const bool want_um = cfg_.trains_unmixed();
  const bool want_mixed = cfg_.trains_mixed();
  const bool want_srl = cfg_.uses_srl();
  if (want_mixed && b < 2) throw std::invalid_argument("stage-2 mixing needs a batch of >= 2");

  // Rolled, mixed copy of the batch.
  std::vector<dsp::LogMelSpectrogram> mixed;
  std::vector<std::vector<bool>> mixed_cols;
  std::vector<int> overlay_of;
  if (want_mixed) {
    const bool wave = cfg_.strategy == mix::MixStrategy::kWaveAvg;
    if (wave && static_cast<int>(waves.size()) != b)
      throw std::invalid_argument("wave_avg mixing needs the batch waveforms");
    const int hop = static_cast<int>(
        std::lround(cfg_.frontend.mel.hop_ms * cfg_.frontend.sample_rate / 1000.0));
    if (cfg_.extent == MixExtent::kPartial && !wave) {
      std::vector<dsp::LogMelSpectrogram> copies;
      for (const auto* x : batch) copies.push_back(*x);
      mix::RolledBatch rb = mix::roll_mix_batch(copies, rng, cfg_.strategy);
      mixed = std::move(rb.mixed);
      overlay_of = rb.overlay_of;
      for (const auto& p : rb.plans) mixed_cols.push_back(mix::mixed_columns(p, grid_.cols));
    } else {
      for (int i = 0; i < b; ++i) {
        const int j = (i + 1) % b;
        overlay_of.push_back(j);
        if (cfg_.extent == MixExtent::kPartial) {
          const mix::MixPlan plan = mix::sample_mix_plan(batch[i]->frames(), rng);
          mixed.push_back(data::model_input(
              mix::mix_waveforms_partial(*waves[i], *waves[j], plan, hop), cfg_.frontend));
          mixed_cols.push_back(mix::mixed_columns(plan, grid_.cols));
        } else {
          if (wave) {
            if (waves[i]->samples.size() != waves[j]->samples.size())
              throw std::invalid_argument("wave_avg: waveform lengths differ");
            dsp::Waveform m = *waves[i];
            for (size_t s = 0; s < m.samples.size(); ++s)
              m.samples[s] = 0.5 * (waves[i]->samples[s] + waves[j]->samples[s]);
            mixed.push_back(data::model_input(m, cfg_.frontend));
          } else {
            mixed.push_back(mix::mix_full(*batch[i], *batch[j], cfg_.strategy));
          }
          mixed_cols.emplace_back(grid_.cols, true);
        }
      }
    }
  }

  // Teacher targets: one pass per distinct input.
  std::vector<patch::TokenSequence> teacher_seq;
  std::vector<model::Targets> t_um;
  if (want_um || want_srl) {
    for (const auto* x : batch) {
      teacher_seq.push_back(model::embed(*x, teacher_, mc));
      const auto lo =
          model::teacher_forward(model::with_cls(teacher_seq.back(), teacher_), teacher_, mc);
      t_um.push_back(model::build_targets(lo, mc.depth, cfg_.normalize_targets));
    }
  }
  std::vector<model::Targets> t_m_global;
  std::vector<model::Targets> t_m_local;
  std::vector<model::Targets> t_s1;
  if (want_mixed) {
    for (int i = 0; i < b; ++i) {
      const auto lo = model::teacher_forward(
          model::with_cls(model::embed(mixed[i], teacher_, mc), teacher_), teacher_, mc);
      if (w[loss::kGlobalMixed] > 0)
        t_m_global.push_back(model::build_targets(lo, cfg_.top_k_global, cfg_.normalize_targets));
      if (w[loss::kLocalMixed] > 0)
        t_m_local.push_back(model::build_targets(lo, cfg_.local_top_k(), cfg_.normalize_targets));
    }
  }
  if (want_srl) {
    for (int i = 0; i < b; ++i) {
      const patch::TokenSequence region =
          patch::drop_region_tokens(teacher_seq[overlay_of[i]], grid_, mixed_cols[i]);
      const auto lo =
          model::teacher_forward(model::with_cls(region, teacher_), teacher_, mc);
      t_s1.push_back(model::build_targets(lo, mc.depth, cfg_.normalize_targets));
    }
  }

  // Student: n_MC masked clones of every input.
  const double keep = 1.0 - cfg_.mask_ratio;
  struct StudentBatch {
    loss::PerClone<ag::Var> cls;
    loss::PerClone<ag::Var> y;
    loss::PerClone<patch::MaskSet> masks;
  };
  auto run_student = [&](const dsp::LogMelSpectrogram& x, StudentBatch& out) {
    const patch::TokenSequence seq = model::embed(x, student_, mc);
    std::vector<patch::MaskSet> masks =
        patch::sample_inverse_block_masks(grid_, keep, cfg_.mask_block, cfg_.clone_batch, rng);
    std::vector<ag::Var> cls;
    std::vector<ag::Var> y;
    for (const auto& m : masks) {
      const model::StudentOutputs so = model::student_forward(
          model::with_cls(patch::drop_masked(seq, m, grid_), student_), student_, mc);
      cls.push_back(so.cls);
      y.push_back(model::decode(so, m, grid_, student_, mc, rng));
    }
    out.cls.push_back(std::move(cls));
    out.y.push_back(std::move(y));
    out.masks.push_back(std::move(masks));
  };
  StudentBatch s_um;
  StudentBatch s_m;
  if (want_um)
    for (const auto* x : batch) run_student(*x, s_um);
  if (want_mixed)
    for (const auto& x : mixed) run_student(x, s_m);

  auto ptrs = [](const std::vector<model::Targets>& v) {
    std::vector<const model::Targets*> p;
    for (const auto& t : v) p.push_back(&t);
    return p;
  };
  auto pooled = [](const std::vector<model::Targets>& v) {
    std::vector<RowVec> p;
    for (const auto& t : v) p.push_back(t.z_cls);
    return p;
  };

  LossGraph g;
  g.bundle.weights = w;
  std::vector<ag::Var> terms;
  std::vector<double> term_weights;
  auto add = [&](int term, ag::Var v) {
    g.bundle.values[term] = v->scalar();
    g.bundle.enabled[term] = true;
    terms.push_back(std::move(v));
    term_weights.push_back(w[term]);
  };
  if (w[loss::kGlobalUnmixed] > 0) add(loss::kGlobalUnmixed, loss::global_loss(s_um.cls, pooled(t_um)));
  if (w[loss::kLocalUnmixed] > 0)
    add(loss::kLocalUnmixed, loss::local_loss(s_um.y, ptrs(t_um), s_um.masks));
  if (want_mixed && w[loss::kGlobalMixed] > 0)
    add(loss::kGlobalMixed, loss::global_loss(s_m.cls, pooled(t_m_global)));
  if (want_mixed && w[loss::kLocalMixed] > 0)
    add(loss::kLocalMixed, loss::local_loss(s_m.y, ptrs(t_m_local), s_m.masks));
  if (want_srl) {
    loss::SrlResult r = loss::srl_loss(s_m.y, ptrs(t_s1), ptrs(t_um), s_m.masks, mixed_cols,
                                       grid_, cfg_.srl_aggregation);
    g.bundle.srl_degenerate = r.degenerate;
    g.stats.srl_tokens = r.count;
    add(loss::kSrl, r.loss);
  }
  g.bundle.total = loss::combine(g.bundle);
  g.total = ag::weighted_sum(terms, term_weights);
  g.stats.unmixed_items = want_um ? b : 0;
  g.stats.mixed_items = want_mixed ? b : 0;
  return g;
}

StepResult Trainer::step(const std::vector<const dsp::LogMelSpectrogram*>& batch,
                         const std::vector<const dsp::Waveform*>& waves) {
  if (total_steps_ < 1) throw std::invalid_argument("trainer: total steps not set");
  std::mt19937_64 rng = step_rng(steps_done_);
  student_.zero_grad();
  LossGraph g = forward_losses(batch, waves, rng);

  StepResult r;
  r.bundle = g.bundle;
  r.stats = g.stats;
  r.step = steps_done_ + 1;
  if (!std::isfinite(g.total->scalar())) {
    std::string detail;
    for (int i = 0; i < loss::kNumTerms; ++i)
      if (g.bundle.enabled[i])
        detail += std::string(" ") + loss::term_key(i) + "=" + cfg::format_double(g.bundle.values[i]);
    throw NumericalError("non-finite loss at step " + std::to_string(r.step) + ":" + detail);
  }
  ag::backward(g.total);
  g = {};  // release the graph before the update

  r.grad_norm = clip_grad_norm(student_, cfg_.grad_clip);
  r.lr = cosine_lr(steps_done_, cfg_.peak_lr, cfg_.min_lr, warmup_steps(), total_steps_);
  adamw_step(student_, opt_,
             {r.lr, cfg_.weight_decay, cfg_.beta1, cfg_.beta2, cfg_.adam_eps});
  r.tau = model::momentum_schedule(steps_done_, total_steps_, cfg_.ema_start, cfg_.ema_end);
  model::ema_update(teacher_, student_, r.tau);
  student_.zero_grad();
  ++steps_done_;
  return r;
}

std::string metrics_line(const StepResult& r) {
  std::string s = "step=" + std::to_string(r.step) +
                  " loss_total=" + cfg::format_double(r.bundle.total);
  for (int i = 0; i < loss::kNumTerms; ++i) {
    s += std::string(" ") + loss::term_key(i) + "=";
    s += r.bundle.enabled[i] ? cfg::format_double(r.bundle.values[i]) : "na";
  }
  s += " lr=" + cfg::format_double(r.lr) + " tau=" + cfg::format_double(r.tau);
  return s;
}

std::int64_t steps_per_epoch(size_t n_clips, int batch_size) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  const auto n = static_cast<std::int64_t>(n_clips) / batch_size;
  if (n < 1)
    throw DataError("dataset of " + std::to_string(n_clips) + " clips is smaller than one batch");
  return n;
}

std::vector<int> batch_indices(std::int64_t step, size_t n_clips, int batch_size,
                               std::uint64_t seed) {
  const std::int64_t spe = steps_per_epoch(n_clips, batch_size);
  const std::int64_t epoch = step / spe;
  const std::int64_t within = step % spe;
  std::vector<int> perm(n_clips);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng = make_rng(seed, Stream::kEpoch, static_cast<std::uint64_t>(epoch));
  std::shuffle(perm.begin(), perm.end(), rng);
  return {perm.begin() + within * batch_size, perm.begin() + (within + 1) * batch_size};
}

namespace {

std::int64_t logged_step(const std::string& line) {
  if (line.rfind("step=", 0) != 0) return -1;
  try {
    return std::stoll(line.substr(5, line.find(' ') - 5));
  } catch (const std::exception&) {
    return -1;
  }
}

}  // namespace

RunResult run_stage(const std::vector<data::Clip>& clips, const StageConfig& cfg,
                    const RunOptions& options) {
  cfg.validate();
  if (clips.empty()) throw DataError("no training clips");
  const patch::PatchGrid grid = patch::grid_for(clips[0].spec.frames(), clips[0].spec.bins());
  const std::int64_t spe = steps_per_epoch(clips.size(), cfg.batch_size);
  const std::int64_t total = cfg.total_steps > 0 ? cfg.total_steps : cfg.epochs * spe;

  Trainer trainer(cfg, grid);
  trainer.set_total_steps(total);
  if (options.resume) {
    trainer.restore(ckpt::load(*options.resume));
  } else if (options.init_checkpoint) {
    trainer.init_from(ckpt::load(*options.init_checkpoint));
  } else if (cfg.stage == 2) {
    throw std::invalid_argument("stage 2 requires a stage-1 checkpoint (--init-checkpoint)");
  }

  const bool wave = cfg.trains_mixed() && cfg.strategy == mix::MixStrategy::kWaveAvg;
  if (wave)
    for (const auto& c : clips)
      if (c.wave.samples.empty()) throw DataError("wave_avg mixing needs waveforms for " + c.path);

  namespace fs = std::filesystem;
  fs::create_directories(options.run_dir / "checkpoints");
  {
    std::ofstream snap(options.run_dir / "config.toml");
    snap << to_table(cfg).dump();
    if (!snap) throw DataError("cannot write config snapshot in " + options.run_dir.string());
  }

  const fs::path log_path = options.run_dir / "metrics.log";
  std::vector<std::string> kept;
  if (options.resume && fs::exists(log_path)) {
    std::ifstream in(log_path);
    std::string line;
    while (std::getline(in, line)) {
      const std::int64_t s = logged_step(line);
      if (s >= 1 && s <= trainer.steps_done()) kept.push_back(line);
    }
  }
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw DataError("cannot write " + log_path.string());
  for (const auto& l : kept) log << l << "\n";
  log.flush();

  RunResult result;
  auto save_step = [&](std::int64_t n) {
    const fs::path p = options.run_dir / "checkpoints" / ("step_" + std::to_string(n) + ".ckpt");
    ckpt::save(trainer.checkpoint(), p);
    result.final_checkpoint = p;
  };

  while (trainer.steps_done() < total) {
    if (options.stop_after >= 0 && trainer.steps_done() >= options.stop_after) break;
    const auto idx = batch_indices(trainer.steps_done(), clips.size(), cfg.batch_size, cfg.seed);
    std::vector<const dsp::LogMelSpectrogram*> specs;
    std::vector<const dsp::Waveform*> waves;
    for (int i : idx) {
      specs.push_back(&clips[i].spec);
      if (wave) waves.push_back(&clips[i].wave);
    }
    StepResult r = trainer.step(specs, waves);
    log << metrics_line(r) << "\n";
    log.flush();
    if (options.on_step) options.on_step(r);
    result.history.push_back(std::move(r));
    if (cfg.checkpoint_every > 0 && trainer.steps_done() % cfg.checkpoint_every == 0)
      save_step(trainer.steps_done());
  }

  result.steps_done = trainer.steps_done();
  if (trainer.steps_done() >= total) {
    result.final_checkpoint = options.run_dir / "final.ckpt";
    ckpt::save(trainer.checkpoint(), result.final_checkpoint);
  } else if (result.final_checkpoint.empty() ||
             result.final_checkpoint.filename() !=
                 "step_" + std::to_string(trainer.steps_done()) + ".ckpt") {
    save_step(trainer.steps_done());
  }
  return result;
}

}  // namespace sslam::train

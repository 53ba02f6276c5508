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

// Full and partial mixing of log-mel spectrograms.
//
// A partial mix overlays a second clip onto three disjoint, patch-aligned
// time regions that together cover half of the base clip. Everything
// outside the regions is copied from the base bit for bit.

#ifndef SSLAM_MIXER_H_
#define SSLAM_MIXER_H_

#include <array>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "sslam/dsp.h"

namespace sslam::mix {

inline constexpr int kPatchFrames = 16;

// Half-open frame interval.
struct FrameRegion {
  int start = 0;
  int end = 0;
  int length() const { return end - start; }
  bool operator==(const FrameRegion&) const = default;
};

struct MixPlan {
  std::array<FrameRegion, 3> regions;
  int total_frames = 0;  // T of the clips the plan applies to

  int mixed_frames() const;
  bool covers(int frame) const;
  bool operator==(const MixPlan&) const = default;
};

enum class MixStrategy { kSpecMax, kSpecAvg, kWaveAvg };

std::string to_string(MixStrategy s);
MixStrategy parse_mix_strategy(const std::string& name);

// Frames a plan for a T-frame clip must cover: the multiple of 16 nearest
// T / 2 (ties resolved downward).
int target_mixed_frames(int total_frames);

// Throws std::invalid_argument unless the plan is three non-empty, pairwise
// disjoint, 16-aligned regions inside [0, T) covering target_mixed_frames(T).
void validate(const MixPlan& plan);

// Element-wise combination of equally shaped spectrograms. kWaveAvg is a
// waveform-domain strategy and is rejected here.
dsp::LogMelSpectrogram mix_full(const dsp::LogMelSpectrogram& a,
                                const dsp::LogMelSpectrogram& b,
                                MixStrategy strategy);

// Region lengths are a uniform composition of the target into three
// positive column counts; the four unmixed gaps around them are a uniform
// composition of the remaining columns. Requires at least 6 patch columns.
MixPlan sample_mix_plan(int total_frames, std::mt19937_64& rng);

dsp::LogMelSpectrogram mix_partial(const dsp::LogMelSpectrogram& base,
                                   const dsp::LogMelSpectrogram& overlay,
                                   const MixPlan& plan, MixStrategy strategy);

// Equal-gain waveform average over the sample span of each region (frame f
// starts at sample f * hop). Used by the kWaveAvg ablation before log-mel.
dsp::Waveform mix_waveforms_partial(const dsp::Waveform& base,
                                    const dsp::Waveform& overlay,
                                    const MixPlan& plan, int hop_samples);

// Patch columns touched by the plan, one flag per column.
std::vector<bool> mixed_columns(const MixPlan& plan, int n_cols);

struct RolledBatch {
  std::vector<dsp::LogMelSpectrogram> mixed;
  std::vector<MixPlan> plans;
  // overlay_of[i] is the batch index mixed into item i; item i is the base.
  std::vector<int> overlay_of;
};

// Item i is mixed with item (i + 1) % B using its own freshly sampled plan.
RolledBatch roll_mix_batch(const std::vector<dsp::LogMelSpectrogram>& batch,
                           std::mt19937_64& rng,
                           MixStrategy strategy = MixStrategy::kSpecMax);

nlohmann::json to_json(const MixPlan& plan);
MixPlan mix_plan_from_json(const nlohmann::json& j);

}  // namespace sslam::mix

#endif  // SSLAM_MIXER_H_

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

#include "sslam/mixer.h"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace sslam::mix {

namespace {

// Floyd's algorithm: k distinct values from [0, n), sorted.
std::vector<int> sample_distinct(int k, int n, std::mt19937_64& rng) {
  std::set<int> chosen;
  for (int j = n - k; j < n; ++j) {
    const int t = std::uniform_int_distribution<int>(0, j)(rng);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  return {chosen.begin(), chosen.end()};
}

void require_same_shape(const dsp::LogMelSpectrogram& a,
                        const dsp::LogMelSpectrogram& b, const char* op) {
  if (a.frames() != b.frames() || a.bins() != b.bins())
    throw std::invalid_argument(std::string(op) + ": spectrogram shapes differ");
}

}  // namespace

int MixPlan::mixed_frames() const {
  int n = 0;
  for (const auto& r : regions) n += r.length();
  return n;
}

bool MixPlan::covers(int frame) const {
  for (const auto& r : regions)
    if (frame >= r.start && frame < r.end) return true;
  return false;
}

std::string to_string(MixStrategy s) {
  switch (s) {
    case MixStrategy::kSpecMax:
      return "spec_max";
    case MixStrategy::kSpecAvg:
      return "spec_avg";
    case MixStrategy::kWaveAvg:
      return "wave_avg";
  }
  return "unknown";
}

MixStrategy parse_mix_strategy(const std::string& name) {
  if (name == "spec_max") return MixStrategy::kSpecMax;
  if (name == "spec_avg") return MixStrategy::kSpecAvg;
  if (name == "wave_avg") return MixStrategy::kWaveAvg;
  throw std::invalid_argument("unknown mix strategy '" + name + "'");
}

int target_mixed_frames(int total_frames) {
  // 16 * round(T / 32) with exact halves rounded down.
  const int unit = 2 * kPatchFrames;
  const int q = total_frames / unit;
  const int rem = total_frames % unit;
  return kPatchFrames * (rem > kPatchFrames ? q + 1 : q);
}

void validate(const MixPlan& plan) {
  const int t = plan.total_frames;
  if (t < 6 * kPatchFrames)
    throw std::invalid_argument("mix plan: clip shorter than 6 patch columns");
  auto regions = plan.regions;
  std::sort(regions.begin(), regions.end(),
            [](const FrameRegion& a, const FrameRegion& b) { return a.start < b.start; });
  int prev_end = 0;
  for (const auto& r : regions) {
    if (r.length() <= 0) throw std::invalid_argument("mix plan: empty region");
    if (r.start % kPatchFrames != 0 || r.end % kPatchFrames != 0)
      throw std::invalid_argument("mix plan: region not patch aligned");
    if (r.start < prev_end) throw std::invalid_argument("mix plan: regions overlap");
    if (r.end > t) throw std::invalid_argument("mix plan: region outside clip");
    prev_end = r.end;
  }
  if (plan.mixed_frames() != target_mixed_frames(t))
    throw std::invalid_argument("mix plan: covered frames != half the clip");
}

dsp::LogMelSpectrogram mix_full(const dsp::LogMelSpectrogram& a,
                                const dsp::LogMelSpectrogram& b,
                                MixStrategy strategy) {
  require_same_shape(a, b, "mix_full");
  switch (strategy) {
    case MixStrategy::kSpecMax:
      return {a.data.cwiseMax(b.data)};
    case MixStrategy::kSpecAvg:
      return {(a.data + b.data) * 0.5};
    case MixStrategy::kWaveAvg:
      break;
  }
  throw std::invalid_argument("mix_full: wave_avg mixes waveforms, not spectrograms");
}

MixPlan sample_mix_plan(int total_frames, std::mt19937_64& rng) {
  const int n_cols = total_frames / kPatchFrames;
  if (n_cols < 6)
    throw std::invalid_argument("sample_mix_plan: need at least 6 patch columns, got " +
                                std::to_string(n_cols));
  const int mixed_cols = target_mixed_frames(total_frames) / kPatchFrames;
  const int free_cols = n_cols - mixed_cols;

  // Two cut points in [1, mixed_cols) split the mixed columns into 3 parts.
  const auto cuts = sample_distinct(2, mixed_cols - 1, rng);
  const std::array<int, 3> lengths = {cuts[0] + 1, cuts[1] - cuts[0],
                                      mixed_cols - 1 - cuts[1]};
  // Stars and bars over the unmixed columns: 4 non-negative gaps.
  const auto bars = sample_distinct(3, free_cols + 3, rng);
  const std::array<int, 4> gaps = {bars[0], bars[1] - bars[0] - 1,
                                   bars[2] - bars[1] - 1, free_cols + 2 - bars[2]};

  MixPlan plan;
  plan.total_frames = total_frames;
  int col = 0;
  for (int i = 0; i < 3; ++i) {
    col += gaps[i];
    plan.regions[i] = {col * kPatchFrames, (col + lengths[i]) * kPatchFrames};
    col += lengths[i];
  }
  return plan;
}

dsp::LogMelSpectrogram mix_partial(const dsp::LogMelSpectrogram& base,
                                   const dsp::LogMelSpectrogram& overlay,
                                   const MixPlan& plan, MixStrategy strategy) {
  require_same_shape(base, overlay, "mix_partial");
  if (plan.total_frames != base.frames())
    throw std::invalid_argument("mix_partial: plan built for a different length");
  validate(plan);
  if (strategy == MixStrategy::kWaveAvg)
    throw std::invalid_argument("mix_partial: wave_avg mixes waveforms, not spectrograms");
  dsp::LogMelSpectrogram out = base;
  for (const auto& r : plan.regions) {
    auto dst = out.data.middleRows(r.start, r.length());
    const auto src = overlay.data.middleRows(r.start, r.length());
    if (strategy == MixStrategy::kSpecMax) {
      dst = dst.cwiseMax(src);
    } else {
      dst = (dst + src) * 0.5;
    }
  }
  return out;
}

dsp::Waveform mix_waveforms_partial(const dsp::Waveform& base,
                                    const dsp::Waveform& overlay,
                                    const MixPlan& plan, int hop_samples) {
  if (base.sample_rate != overlay.sample_rate ||
      base.samples.size() != overlay.samples.size())
    throw std::invalid_argument("mix_waveforms_partial: waveforms differ in shape");
  if (hop_samples <= 0) throw std::invalid_argument("mix_waveforms_partial: hop <= 0");
  validate(plan);
  dsp::Waveform out = base;
  for (const auto& r : plan.regions) {
    const size_t lo = static_cast<size_t>(r.start) * hop_samples;
    const size_t hi =
        std::min(out.samples.size(), static_cast<size_t>(r.end) * hop_samples);
    for (size_t i = lo; i < hi; ++i)
      out.samples[i] = 0.5 * (base.samples[i] + overlay.samples[i]);
  }
  return out;
}

std::vector<bool> mixed_columns(const MixPlan& plan, int n_cols) {
  std::vector<bool> cols(n_cols, false);
  for (const auto& r : plan.regions) {
    for (int c = r.start / kPatchFrames; c < r.end / kPatchFrames; ++c) {
      if (c >= n_cols) throw std::invalid_argument("mixed_columns: plan exceeds grid");
      cols[c] = true;
    }
  }
  return cols;
}

RolledBatch roll_mix_batch(const std::vector<dsp::LogMelSpectrogram>& batch,
                           std::mt19937_64& rng, MixStrategy strategy) {
  const int b = static_cast<int>(batch.size());
  if (b < 2) throw std::invalid_argument("roll_mix_batch: batch size < 2");
  RolledBatch out;
  out.mixed.reserve(b);
  out.plans.reserve(b);
  out.overlay_of.reserve(b);
  for (int i = 0; i < b; ++i) {
    const int j = (i + 1) % b;
    MixPlan plan = sample_mix_plan(batch[i].frames(), rng);
    out.mixed.push_back(mix_partial(batch[i], batch[j], plan, strategy));
    out.plans.push_back(plan);
    out.overlay_of.push_back(j);
  }
  return out;
}

nlohmann::json to_json(const MixPlan& plan) {
  nlohmann::json regions = nlohmann::json::array();
  for (const auto& r : plan.regions) regions.push_back({r.start, r.end});
  return {{"total_frames", plan.total_frames}, {"regions", regions}};
}

MixPlan mix_plan_from_json(const nlohmann::json& j) {
  MixPlan plan;
  plan.total_frames = j.at("total_frames").get<int>();
  const auto& regions = j.at("regions");
  if (!regions.is_array() || regions.size() != 3)
    throw std::invalid_argument("mix plan json: need exactly 3 regions");
  for (size_t i = 0; i < 3; ++i)
    plan.regions[i] = {regions[i].at(0).get<int>(), regions[i].at(1).get<int>()};
  validate(plan);
  return plan;
}

}  // namespace sslam::mix

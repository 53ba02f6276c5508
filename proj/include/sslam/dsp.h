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

// Waveform to normalized log-mel spectrogram front end.
//
// Framing uses fully covered windows only (no padding), so a waveform of
// `n` samples yields 1 + floor((n - win) / hop) frames.

#ifndef SSLAM_DSP_H_
#define SSLAM_DSP_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sslam/autograd.h"

namespace sslam::dsp {

inline constexpr int kPipelineSampleRate = 16000;
inline constexpr int kPipelineMelBins = 128;

struct Waveform {
  std::vector<double> samples;
  int sample_rate = kPipelineSampleRate;
};

// Frames along rows, mel bins along columns.
struct LogMelSpectrogram {
  Mat data;

  int frames() const { return static_cast<int>(data.rows()); }
  int bins() const { return static_cast<int>(data.cols()); }
};

struct NormalizationStats {
  double mean = -4.268;
  double std = 4.569;
};

enum class MelScale { kHtk, kSlaney };

struct MelConfig {
  int n_mels = kPipelineMelBins;
  double win_ms = 25.0;
  double hop_ms = 10.0;
  int fft_size = 512;
  double f_min = 0.0;
  double f_max = 0.0;  // 0 means Nyquist
  MelScale scale = MelScale::kHtk;
  double log_floor = 1e-10;
};

// Band-limited (windowed sinc) resampling. Returns a copy when the rates
// already match.
Waveform resample(const Waveform& w, int target_rate);

// Crops or zero-pads to round(seconds * sample_rate) samples.
Waveform fit_duration(const Waveform& w, double seconds);

double hz_to_mel(double hz, MelScale scale);
double mel_to_hz(double mel, MelScale scale);

// Triangular filterbank, [n_mels x (fft_size / 2 + 1)].
Mat mel_filterbank(const MelConfig& cfg, int sample_rate);

int frame_count(int n_samples, int win, int hop);

LogMelSpectrogram log_mel(const Waveform& w, const MelConfig& cfg = {});

LogMelSpectrogram normalize(const LogMelSpectrogram& s,
                            const NormalizationStats& stats);
LogMelSpectrogram denormalize(const LogMelSpectrogram& s,
                              const NormalizationStats& stats);

// Crops or pads (with `pad_value`) along time to exactly `frames` rows.
LogMelSpectrogram fit_frames(const LogMelSpectrogram& s, int frames,
                             double pad_value);

// Mono PCM WAV, 16-bit integer or 32-bit float.
Waveform read_wav(const std::filesystem::path& path);
enum class WavEncoding { kPcm16, kFloat32 };
void write_wav(const std::filesystem::path& path, const Waveform& w,
               WavEncoding encoding = WavEncoding::kPcm16);

// Binary spectrogram cache: "SSLAMSPC", u32 version, u32 T, u32 F, then
// T * F little-endian f32 values in row-major order.
inline constexpr std::uint32_t kSpectrogramCacheVersion = 1;
void write_spectrogram_cache(const std::filesystem::path& path,
                             const LogMelSpectrogram& s);
LogMelSpectrogram read_spectrogram_cache(const std::filesystem::path& path);

// Binary graymap (P5): time runs left to right, low mel bins at the bottom.
void write_pgm(const std::filesystem::path& path, const LogMelSpectrogram& s);

}  // namespace sslam::dsp

#endif  // SSLAM_DSP_H_

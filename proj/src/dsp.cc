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

#include "sslam/dsp.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

namespace sslam::dsp {

namespace {

// Zero crossings on each side of the resampling kernel.
constexpr int kSincZeroCrossings = 32;
constexpr double kSincRolloff = 0.97;

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

}  // namespace

Waveform resample(const Waveform& w, int target_rate) {
  if (target_rate <= 0) throw std::invalid_argument("resample: target_rate <= 0");
  if (w.sample_rate <= 0) throw std::invalid_argument("resample: sample_rate <= 0");
  if (w.samples.empty()) throw std::invalid_argument("resample: empty waveform");
  if (w.sample_rate == target_rate) return w;

  const double ratio = static_cast<double>(target_rate) / w.sample_rate;
  const auto n_out = static_cast<size_t>(
      std::llround(static_cast<double>(w.samples.size()) * ratio));
  // Cutoff relative to the input Nyquist frequency.
  const double cutoff = std::min(1.0, ratio) * kSincRolloff;
  const double half_width = kSincZeroCrossings / cutoff;
  const auto n_in = static_cast<long>(w.samples.size());

  Waveform out;
  out.sample_rate = target_rate;
  out.samples.resize(n_out);
  for (size_t n = 0; n < n_out; ++n) {
    const double center = static_cast<double>(n) / ratio;
    const long lo = std::max(0L, static_cast<long>(std::ceil(center - half_width)));
    const long hi =
        std::min(n_in - 1, static_cast<long>(std::floor(center + half_width)));
    double acc = 0.0;
    for (long k = lo; k <= hi; ++k) {
      const double u = center - static_cast<double>(k);
      const double hann =
          0.5 + 0.5 * std::cos(std::numbers::pi * u / half_width);
      acc += w.samples[k] * cutoff * sinc(cutoff * u) * hann;
    }
    out.samples[n] = acc;
  }
  return out;
}

Waveform fit_duration(const Waveform& w, double seconds) {
  if (seconds <= 0) throw std::invalid_argument("fit_duration: seconds <= 0");
  Waveform out = w;
  out.samples.resize(static_cast<size_t>(std::llround(seconds * w.sample_rate)),
                     0.0);
  return out;
}

double hz_to_mel(double hz, MelScale scale) {
  if (scale == MelScale::kHtk) return 2595.0 * std::log10(1.0 + hz / 700.0);
  // Slaney: linear below 1 kHz, logarithmic above.
  constexpr double kFSp = 200.0 / 3.0;
  constexpr double kMinLogHz = 1000.0;
  const double min_log_mel = kMinLogHz / kFSp;
  const double logstep = std::log(6.4) / 27.0;
  if (hz < kMinLogHz) return hz / kFSp;
  return min_log_mel + std::log(hz / kMinLogHz) / logstep;
}

double mel_to_hz(double mel, MelScale scale) {
  if (scale == MelScale::kHtk) return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
  constexpr double kFSp = 200.0 / 3.0;
  constexpr double kMinLogHz = 1000.0;
  const double min_log_mel = kMinLogHz / kFSp;
  const double logstep = std::log(6.4) / 27.0;
  if (mel < min_log_mel) return mel * kFSp;
  return kMinLogHz * std::exp(logstep * (mel - min_log_mel));
}

Mat mel_filterbank(const MelConfig& cfg, int sample_rate) {
  if (cfg.n_mels <= 0 || cfg.fft_size <= 0)
    throw std::invalid_argument("mel_filterbank: bad configuration");
  const double f_max = cfg.f_max > 0 ? cfg.f_max : sample_rate / 2.0;
  const int n_bins = cfg.fft_size / 2 + 1;
  const double mel_lo = hz_to_mel(cfg.f_min, cfg.scale);
  const double mel_hi = hz_to_mel(f_max, cfg.scale);

  std::vector<double> edges(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1),
                         cfg.scale);
  }
  Mat fb = Mat::Zero(cfg.n_mels, n_bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double left = edges[m];
    const double center = edges[m + 1];
    const double right = edges[m + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / cfg.fft_size;
      double v = 0.0;
      if (f > left && f <= center) {
        v = (f - left) / (center - left);
      } else if (f > center && f < right) {
        v = (right - f) / (right - center);
      }
      fb(m, k) = v;
    }
  }
  return fb;
}

int frame_count(int n_samples, int win, int hop) {
  if (n_samples < win) return 0;
  return 1 + (n_samples - win) / hop;
}

LogMelSpectrogram log_mel(const Waveform& w, const MelConfig& cfg) {
  if (w.sample_rate <= 0) throw std::invalid_argument("log_mel: sample_rate <= 0");
  const int win = static_cast<int>(std::lround(cfg.win_ms * w.sample_rate / 1000.0));
  const int hop = static_cast<int>(std::lround(cfg.hop_ms * w.sample_rate / 1000.0));
  if (win <= 0 || hop <= 0) throw std::invalid_argument("log_mel: empty window");
  if (cfg.fft_size < win)
    throw std::invalid_argument("log_mel: fft_size smaller than window");
  const int n_frames =
      frame_count(static_cast<int>(w.samples.size()), win, hop);
  if (n_frames < 1)
    throw std::invalid_argument("log_mel: waveform shorter than one window");

  const Mat fb = mel_filterbank(cfg, w.sample_rate);
  std::vector<double> window(win);
  for (int i = 0; i < win; ++i) {
    // Periodic Hann.
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / win);
  }

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(cfg.fft_size, 0.0);
  std::vector<std::complex<double>> spectrum;
  Eigen::VectorXd power(cfg.fft_size / 2 + 1);

  LogMelSpectrogram out;
  out.data.resize(n_frames, cfg.n_mels);
  for (int t = 0; t < n_frames; ++t) {
    const size_t start = static_cast<size_t>(t) * hop;
    for (int i = 0; i < win; ++i) frame[i] = w.samples[start + i] * window[i];
    std::fill(frame.begin() + win, frame.end(), 0.0);
    fft.fwd(spectrum, frame);
    for (int k = 0; k < power.size(); ++k) power(k) = std::norm(spectrum[k]);
    Eigen::VectorXd mel = fb * power;
    for (int m = 0; m < cfg.n_mels; ++m)
      out.data(t, m) = std::log(std::max(mel(m), cfg.log_floor));
  }
  return out;
}

LogMelSpectrogram normalize(const LogMelSpectrogram& s,
                            const NormalizationStats& stats) {
  if (!(stats.std > 0)) throw std::invalid_argument("normalize: std <= 0");
  return {(s.data.array() - stats.mean) / stats.std};
}

LogMelSpectrogram denormalize(const LogMelSpectrogram& s,
                              const NormalizationStats& stats) {
  if (!(stats.std > 0)) throw std::invalid_argument("denormalize: std <= 0");
  return {s.data.array() * stats.std + stats.mean};
}

LogMelSpectrogram fit_frames(const LogMelSpectrogram& s, int frames,
                             double pad_value) {
  if (frames <= 0) throw std::invalid_argument("fit_frames: frames <= 0");
  LogMelSpectrogram out;
  out.data = Mat::Constant(frames, s.bins(), pad_value);
  const int keep = std::min(frames, s.frames());
  out.data.topRows(keep) = s.data.topRows(keep);
  return out;
}

}  // namespace sslam::dsp

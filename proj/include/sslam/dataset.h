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

// Clip manifests and the waveform-to-model-input pipeline.
//
// A manifest is JSON lines, one clip per line:
//   {"path": "clips/000.wav", "duration": 10.0, "labels": [0, 1, 0, ...]}
// Relative paths resolve against the manifest's directory. "labels" is an
// optional multi-hot vector.

#ifndef SSLAM_DATASET_H_
#define SSLAM_DATASET_H_

#include <filesystem>
#include <string>
#include <vector>

#include "sslam/dsp.h"

namespace sslam::data {

struct ManifestEntry {
  std::string path;
  double duration = 0.0;
  std::vector<int> labels;  // multi-hot; empty if unlabeled
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

struct FrontendConfig {
  int sample_rate = dsp::kPipelineSampleRate;
  double clip_seconds = 10.0;
  int target_frames = 992;  // 62 patch columns
  dsp::MelConfig mel;
  dsp::NormalizationStats stats;
};

// Resample, then trim or zero-pad to clip_seconds.
dsp::Waveform prepare_waveform(const dsp::Waveform& w, const FrontendConfig& fe);
// Log-mel, fit to target_frames (padding with the log floor), normalize.
dsp::LogMelSpectrogram model_input(const dsp::Waveform& prepared, const FrontendConfig& fe);

struct Clip {
  std::string path;
  dsp::Waveform wave;  // prepared; empty unless requested
  dsp::LogMelSpectrogram spec;
  std::vector<int> labels;
};

// Loads every clip of a manifest. Unreadable or mislabeled clips raise
// DataError naming the clip.
std::vector<Clip> load_clips(const std::filesystem::path& manifest, const FrontendConfig& fe,
                             bool keep_waveforms = false);

// Row i = labels of clip i; throws DataError when label widths differ.
std::vector<std::vector<int>> label_matrix(const std::vector<Clip>& clips);

}  // namespace sslam::data

#endif  // SSLAM_DATASET_H_

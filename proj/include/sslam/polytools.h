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

// Label-ontology polyphony analysis and a synthetic polyphonic clip
// generator.

#ifndef SSLAM_POLYTOOLS_H_
#define SSLAM_POLYTOOLS_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "sslam/dataset.h"
#include "sslam/dsp.h"

namespace sslam::poly {

class Ontology {
 public:
  // AudioSet-style JSON: an array of {"id": ..., "name": ..., "child_ids": [...]}.
  static Ontology parse_json(const std::string& text, const std::string& source = "<string>");
  static Ontology load(const std::filesystem::path& path);
  // Throws DataError on dangling ids, self-loops or cycles.
  static Ontology from_edges(const std::vector<std::string>& ids,
                             const std::vector<std::pair<std::string, std::string>>& parent_child);

  bool contains(const std::string& id) const { return nodes_.count(id) > 0; }
  const std::set<std::string>& nodes() const { return nodes_; }
  // Only ids with at least one parent (child) appear as keys.
  const std::map<std::string, std::set<std::string>>& id_to_parent() const { return parents_; }
  const std::map<std::string, std::set<std::string>>& id_to_children() const { return children_; }
  const std::set<std::string>& parents(const std::string& id) const;
  const std::set<std::string>& children(const std::string& id) const;
  std::string name(const std::string& id) const;

 private:
  std::set<std::string> nodes_;
  std::map<std::string, std::set<std::string>> parents_;
  std::map<std::string, std::set<std::string>> children_;
  std::map<std::string, std::string> names_;
};

// Ancestors and descendants within `levels` hops, excluding `label`.
std::set<std::string> related_labels(const std::string& label, int levels, const Ontology& o);

// Walks labels in sorted order and keeps each one unrelated (within
// `levels`) to every label kept before it.
int distinct_event_count(const std::set<std::string>& labels, int levels, const Ontology& o);

// Percent of clips with at least two distinct events.
double polyphony_percentage(const std::vector<std::set<std::string>>& clips, int levels,
                            const Ontology& o);

// One label set per line: {"labels": ["/m/...", ...]}.
std::vector<std::set<std::string>> read_label_sets(const std::filesystem::path& path);

enum class EventKind { kTone = 0, kChirp, kNoiseBurst, kAmTone };
inline constexpr int kNumKinds = 4;
inline constexpr int kNumBands = 4;
inline constexpr int kNumSynthClasses = kNumKinds * kNumBands;

std::string to_string(EventKind k);
// Class id = kind * 4 + band.
inline int class_id(EventKind k, int band) { return static_cast<int>(k) * kNumBands + band; }
std::string class_name(int class_id);
// [low, high] Hz of a frequency band.
std::array<double, 2> band_edges(int band);

struct SynthEvent {
  EventKind kind = EventKind::kTone;
  int band = 0;
  double onset = 0.0;     // s
  double duration = 0.0;  // s
  double f0 = 0.0;        // Hz; chirp start, carrier, or lowest noise component
  double f1 = 0.0;        // Hz; chirp end or highest noise component
  double gain = 0.5;      // (0, 1]
  double mod_hz = 0.0;    // AM rate
  std::uint64_t seed = 0;  // noise phases

  int class_id() const { return poly::class_id(kind, band); }
};

struct SynthConfig {
  int n_clips = 10;
  std::vector<int> degree_bin = {2, 3};  // allowed distinct-event counts
  double clip_seconds = 10.0;
  int sample_rate = dsp::kPipelineSampleRate;
  std::uint64_t seed = 0;
};

struct SynthClip {
  std::vector<SynthEvent> events;
  std::vector<int> labels;  // multi-hot over the 16 classes
  dsp::Waveform wave;
};

// `degree` events of distinct classes placed inside the clip.
std::vector<SynthEvent> sample_events(int degree, double clip_seconds, std::mt19937_64& rng);
dsp::Waveform render_events(const std::vector<SynthEvent>& events, double clip_seconds,
                            int sample_rate);
// Clip `index` of the dataset described by cfg; independent of the others.
SynthClip synth_clip(const SynthConfig& cfg, int index);
std::vector<SynthClip> synth_polyphonic_dataset(const SynthConfig& cfg);

// Writes clips/<prefix>_<i>.wav, manifest.jsonl and events.jsonl under
// out_dir; returns the manifest path.
std::filesystem::path write_synth_dataset(const SynthConfig& cfg,
                                          const std::filesystem::path& out_dir);

}  // namespace sslam::poly

#endif  // SSLAM_POLYTOOLS_H_

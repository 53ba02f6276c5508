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

#include "sslam/polytools.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "sslam/errors.h"
#include "sslam/le_io.h"
#include "sslam/rng.h"

namespace sslam::poly {

namespace {

const std::set<std::string>& empty_set() {
  static const std::set<std::string> s;
  return s;
}

void walk(const std::string& start, int levels,
          const std::map<std::string, std::set<std::string>>& edges,
          std::set<std::string>& out) {
  std::deque<std::pair<std::string, int>> queue{{start, 0}};
  std::set<std::string> seen{start};
  while (!queue.empty()) {
    auto [id, d] = queue.front();
    queue.pop_front();
    if (d == levels) continue;
    auto it = edges.find(id);
    if (it == edges.end()) continue;
    for (const auto& next : it->second) {
      if (!seen.insert(next).second) continue;
      out.insert(next);
      queue.emplace_back(next, d + 1);
    }
  }
}

constexpr int kNoiseComponents = 24;
constexpr double kFadeSeconds = 0.01;

}  // namespace

Ontology Ontology::from_edges(const std::vector<std::string>& ids,
                              const std::vector<std::pair<std::string, std::string>>& parent_child) {
  Ontology o;
  for (const auto& id : ids) {
    if (id.empty()) throw DataError("ontology: empty id");
    if (!o.nodes_.insert(id).second) throw DataError("ontology: duplicate id " + id);
  }
  for (const auto& [p, c] : parent_child) {
    if (!o.contains(p)) throw DataError("ontology: dangling id " + p);
    if (!o.contains(c)) throw DataError("ontology: dangling child id " + c + " of " + p);
    if (p == c) throw DataError("ontology: self-loop at " + p);
    o.children_[p].insert(c);
    o.parents_[c].insert(p);
  }
  // Kahn's algorithm; leftovers sit on a cycle.
  std::map<std::string, int> indegree;
  for (const auto& id : o.nodes_)
    indegree[id] = static_cast<int>(o.parents(id).size());
  std::deque<std::string> ready;
  for (const auto& [id, d] : indegree)
    if (d == 0) ready.push_back(id);
  size_t visited = 0;
  while (!ready.empty()) {
    const std::string id = ready.front();
    ready.pop_front();
    ++visited;
    for (const auto& c : o.children(id))
      if (--indegree[c] == 0) ready.push_back(c);
  }
  if (visited != o.nodes_.size()) {
    for (const auto& [id, d] : indegree)
      if (d > 0) throw DataError("ontology: cycle through " + id);
  }
  return o;
}

Ontology Ontology::parse_json(const std::string& text, const std::string& source) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(source + ": " + e.what());
  }
  if (!j.is_array()) throw DataError(source + ": ontology must be a JSON array");
  std::vector<std::string> ids;
  std::vector<std::pair<std::string, std::string>> edges;
  std::map<std::string, std::string> names;
  for (const auto& rec : j) {
    if (!rec.is_object() || !rec.contains("id") || !rec["id"].is_string())
      throw DataError(source + ": record without a string \"id\"");
    const std::string id = rec["id"].get<std::string>();
    ids.push_back(id);
    if (rec.contains("name") && rec["name"].is_string()) names[id] = rec["name"].get<std::string>();
    if (rec.contains("child_ids")) {
      if (!rec["child_ids"].is_array()) throw DataError(source + ": child_ids must be an array");
      for (const auto& c : rec["child_ids"]) {
        if (!c.is_string()) throw DataError(source + ": child id must be a string");
        edges.emplace_back(id, c.get<std::string>());
      }
    }
  }
  Ontology o = from_edges(ids, edges);
  o.names_ = std::move(names);
  return o;
}

Ontology Ontology::load(const std::filesystem::path& path) {
  const std::vector<char> bytes = le::read_file(path);
  return parse_json(std::string(bytes.begin(), bytes.end()), path.string());
}

const std::set<std::string>& Ontology::parents(const std::string& id) const {
  auto it = parents_.find(id);
  return it == parents_.end() ? empty_set() : it->second;
}

const std::set<std::string>& Ontology::children(const std::string& id) const {
  auto it = children_.find(id);
  return it == children_.end() ? empty_set() : it->second;
}

std::string Ontology::name(const std::string& id) const {
  auto it = names_.find(id);
  return it == names_.end() ? id : it->second;
}

std::set<std::string> related_labels(const std::string& label, int levels, const Ontology& o) {
  if (levels < 1) throw std::invalid_argument("related_labels: levels must be >= 1");
  if (!o.contains(label)) throw DataError("unknown label " + label);
  std::set<std::string> out;
  walk(label, levels, o.id_to_parent(), out);
  walk(label, levels, o.id_to_children(), out);
  out.erase(label);
  return out;
}

int distinct_event_count(const std::set<std::string>& labels, int levels, const Ontology& o) {
  std::vector<std::string> kept;
  for (const auto& l : labels) {  // std::set iterates in sorted order
    const std::set<std::string> rel = related_labels(l, levels, o);
    bool related = false;
    for (const auto& k : kept) related = related || rel.count(k) > 0;
    if (!related) kept.push_back(l);
  }
  return static_cast<int>(kept.size());
}

double polyphony_percentage(const std::vector<std::set<std::string>>& clips, int levels,
                            const Ontology& o) {
  if (clips.empty()) throw std::invalid_argument("polyphony_percentage: no clips");
  int poly = 0;
  for (const auto& c : clips) poly += distinct_event_count(c, levels, o) >= 2 ? 1 : 0;
  return 100.0 * poly / static_cast<double>(clips.size());
}

std::vector<std::set<std::string>> read_label_sets(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::set<std::string>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    try {
      const auto j = nlohmann::json::parse(line);
      std::set<std::string> s;
      for (const auto& l : j.at("labels")) s.insert(l.get<std::string>());
      if (s.empty()) throw DataError(where + ": empty label set");
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return out;
}

std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::kTone:
      return "tone";
    case EventKind::kChirp:
      return "chirp";
    case EventKind::kNoiseBurst:
      return "noise_burst";
    case EventKind::kAmTone:
      return "am_tone";
  }
  return "unknown";
}

std::string class_name(int id) {
  if (id < 0 || id >= kNumSynthClasses) throw std::out_of_range("class_name");
  return to_string(static_cast<EventKind>(id / kNumBands)) + "_band" +
         std::to_string(id % kNumBands);
}

std::array<double, 2> band_edges(int band) {
  static constexpr std::array<std::array<double, 2>, kNumBands> kEdges = {
      {{150.0, 400.0}, {550.0, 1200.0}, {1600.0, 3000.0}, {3800.0, 6800.0}}};
  if (band < 0 || band >= kNumBands) throw std::out_of_range("band_edges");
  return kEdges[band];
}

std::vector<SynthEvent> sample_events(int degree, double clip_seconds, std::mt19937_64& rng) {
  if (degree < 1 || degree > kNumSynthClasses)
    throw std::invalid_argument("degree " + std::to_string(degree) + " exceeds the " +
                                std::to_string(kNumSynthClasses) + "-class inventory");
  std::vector<int> classes(kNumSynthClasses);
  std::iota(classes.begin(), classes.end(), 0);
  for (int i = 0; i < degree; ++i) {
    const int j = std::uniform_int_distribution<int>(i, kNumSynthClasses - 1)(rng);
    std::swap(classes[i], classes[j]);
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<SynthEvent> events;
  for (int i = 0; i < degree; ++i) {
    SynthEvent e;
    e.kind = static_cast<EventKind>(classes[i] / kNumBands);
    e.band = classes[i] % kNumBands;
    const auto [lo, hi] = band_edges(e.band);
    const double max_dur = std::min(6.0, clip_seconds);
    const double min_dur = std::min(2.0, max_dur);
    e.duration = min_dur + (max_dur - min_dur) * u(rng);
    e.onset = (clip_seconds - e.duration) * u(rng);
    const double span = std::log(hi / lo);
    switch (e.kind) {
      case EventKind::kTone:
      case EventKind::kAmTone:
        e.f0 = lo * std::exp(span * (0.15 + 0.7 * u(rng)));
        e.f1 = e.f0;
        break;
      case EventKind::kChirp: {
        const bool up = u(rng) < 0.5;
        e.f0 = up ? lo * 1.05 : hi * 0.95;
        e.f1 = up ? hi * 0.95 : lo * 1.05;
        break;
      }
      case EventKind::kNoiseBurst:
        e.f0 = lo;
        e.f1 = hi;
        break;
    }
    e.mod_hz = 4.0 + 8.0 * u(rng);
    e.gain = 0.3 + 0.6 * u(rng);
    e.seed = rng();
    events.push_back(e);
  }
  std::sort(events.begin(), events.end(),
            [](const SynthEvent& a, const SynthEvent& b) { return a.onset < b.onset; });
  return events;
}

dsp::Waveform render_events(const std::vector<SynthEvent>& events, double clip_seconds,
                            int sample_rate) {
  const size_t n = static_cast<size_t>(std::llround(clip_seconds * sample_rate));
  dsp::Waveform w;
  w.sample_rate = sample_rate;
  w.samples.assign(n, 0.0);
  const double two_pi = 2.0 * std::numbers::pi;
  for (const auto& e : events) {
    if (e.onset < 0 || e.onset + e.duration > clip_seconds + 1e-9 || e.duration <= 0)
      throw std::invalid_argument("synth event outside the clip");
    if (!(e.gain > 0 && e.gain <= 1)) throw std::invalid_argument("synth event gain outside (0, 1]");
    const size_t start = static_cast<size_t>(std::llround(e.onset * sample_rate));
    const size_t len = std::min(n - start, static_cast<size_t>(std::llround(e.duration * sample_rate)));
    const double fade = kFadeSeconds * sample_rate;

    std::vector<double> comp_f;
    std::vector<double> comp_phase;
    if (e.kind == EventKind::kNoiseBurst) {
      std::mt19937_64 rng(e.seed);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (int c = 0; c < kNoiseComponents; ++c) {
        comp_f.push_back(e.f0 * std::pow(e.f1 / e.f0, u(rng)));
        comp_phase.push_back(two_pi * u(rng));
      }
    }
    const double norm_noise = 1.0 / std::sqrt(kNoiseComponents / 2.0);
    for (size_t i = 0; i < len; ++i) {
      const double t = static_cast<double>(i) / sample_rate;
      double env = 1.0;
      if (i < fade) env = i / fade;
      if (len - 1 - i < fade) env = std::min(env, (len - 1 - i) / fade);
      double v = 0.0;
      switch (e.kind) {
        case EventKind::kTone:
          v = std::sin(two_pi * e.f0 * t);
          break;
        case EventKind::kAmTone:
          v = (0.6 + 0.4 * std::sin(two_pi * e.mod_hz * t)) * std::sin(two_pi * e.f0 * t);
          break;
        case EventKind::kChirp: {
          const double k = (e.f1 - e.f0) / e.duration;
          v = std::sin(two_pi * (e.f0 * t + 0.5 * k * t * t));
          break;
        }
        case EventKind::kNoiseBurst:
          for (int c = 0; c < kNoiseComponents; ++c)
            v += std::sin(two_pi * comp_f[c] * t + comp_phase[c]);
          v *= norm_noise * 0.5;
          break;
      }
      w.samples[start + i] += e.gain * env * v;
    }
  }
  double peak = 0.0;
  for (double s : w.samples) peak = std::max(peak, std::abs(s));
  if (peak > 0.95)
    for (double& s : w.samples) s *= 0.95 / peak;
  return w;
}

SynthClip synth_clip(const SynthConfig& cfg, int index) {
  if (cfg.degree_bin.empty()) throw std::invalid_argument("synth: empty degree bin");
  for (int d : cfg.degree_bin)
    if (d < 1 || d > kNumSynthClasses)
      throw std::invalid_argument("degree " + std::to_string(d) + " exceeds the " +
                                  std::to_string(kNumSynthClasses) + "-class inventory");
  std::mt19937_64 rng = make_rng(cfg.seed, Stream::kSynth, static_cast<std::uint64_t>(index));
  const int degree = cfg.degree_bin[std::uniform_int_distribution<size_t>(
      0, cfg.degree_bin.size() - 1)(rng)];
  SynthClip clip;
  clip.events = sample_events(degree, cfg.clip_seconds, rng);
  clip.labels.assign(kNumSynthClasses, 0);
  for (const auto& e : clip.events) clip.labels[e.class_id()] = 1;
  clip.wave = render_events(clip.events, cfg.clip_seconds, cfg.sample_rate);
  return clip;
}

std::vector<SynthClip> synth_polyphonic_dataset(const SynthConfig& cfg) {
  if (cfg.n_clips < 1) throw std::invalid_argument("synth: n_clips must be >= 1");
  std::vector<SynthClip> clips;
  for (int i = 0; i < cfg.n_clips; ++i) clips.push_back(synth_clip(cfg, i));
  return clips;
}

std::filesystem::path write_synth_dataset(const SynthConfig& cfg,
                                          const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "clips");
  std::vector<data::ManifestEntry> entries;
  std::ofstream events(out_dir / "events.jsonl");
  if (!events) throw DataError("cannot write " + (out_dir / "events.jsonl").string());
  for (int i = 0; i < cfg.n_clips; ++i) {
    const SynthClip c = synth_clip(cfg, i);
    char name[32];
    std::snprintf(name, sizeof(name), "clip_%05d.wav", i);
    dsp::write_wav(out_dir / "clips" / name, c.wave, dsp::WavEncoding::kFloat32);
    entries.push_back({std::string("clips/") + name, cfg.clip_seconds, c.labels});
    nlohmann::ordered_json j;
    j["path"] = std::string("clips/") + name;
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    for (const auto& e : c.events) {
      nlohmann::ordered_json ej;
      ej["class"] = class_name(e.class_id());
      ej["onset"] = e.onset;
      ej["duration"] = e.duration;
      ej["f0"] = e.f0;
      ej["f1"] = e.f1;
      ej["gain"] = e.gain;
      list.push_back(ej);
    }
    j["events"] = list;
    events << j.dump() << "\n";
  }
  const fs::path manifest = out_dir / "manifest.jsonl";
  data::write_manifest(manifest, entries);
  return manifest;
}

}  // namespace sslam::poly

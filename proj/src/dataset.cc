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

#include "sslam/dataset.h"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "sslam/errors.h"

namespace sslam::data {

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  const std::filesystem::path base = path.parent_path();
  std::vector<ManifestEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("path") || !j["path"].is_string())
      throw DataError(where + ": record needs a string \"path\"");
    ManifestEntry e;
    std::filesystem::path p = j["path"].get<std::string>();
    e.path = (p.is_relative() ? base / p : p).string();
    if (j.contains("duration")) {
      if (!j["duration"].is_number()) throw DataError(where + ": \"duration\" must be a number");
      e.duration = j["duration"].get<double>();
    }
    if (j.contains("labels")) {
      if (!j["labels"].is_array()) throw DataError(where + ": \"labels\" must be an array");
      for (const auto& v : j["labels"]) {
        if (!v.is_number_integer() || (v.get<int>() != 0 && v.get<int>() != 1))
          throw DataError(where + ": labels must be 0/1");
        e.labels.push_back(v.get<int>());
      }
    }
    entries.push_back(std::move(e));
  }
  if (entries.empty()) throw DataError("manifest " + path.string() + " has no records");
  return entries;
}

void write_manifest(const std::filesystem::path& path,
                    const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path.string());
  for (const auto& e : entries) {
    nlohmann::ordered_json j;
    j["path"] = e.path;
    j["duration"] = e.duration;
    j["labels"] = e.labels;
    out << j.dump() << "\n";
  }
  if (!out) throw DataError("short write to " + path.string());
}

dsp::Waveform prepare_waveform(const dsp::Waveform& w, const FrontendConfig& fe) {
  return dsp::fit_duration(dsp::resample(w, fe.sample_rate), fe.clip_seconds);
}

dsp::LogMelSpectrogram model_input(const dsp::Waveform& prepared, const FrontendConfig& fe) {
  const dsp::LogMelSpectrogram s = dsp::log_mel(prepared, fe.mel);
  return dsp::normalize(dsp::fit_frames(s, fe.target_frames, std::log(fe.mel.log_floor)),
                        fe.stats);
}

std::vector<Clip> load_clips(const std::filesystem::path& manifest, const FrontendConfig& fe,
                             bool keep_waveforms) {
  std::vector<Clip> clips;
  for (const auto& e : read_manifest(manifest)) {
    Clip c;
    c.path = e.path;
    c.labels = e.labels;
    dsp::Waveform w;
    try {
      w = prepare_waveform(dsp::read_wav(e.path), fe);
      c.spec = model_input(w, fe);
    } catch (const std::invalid_argument& err) {
      throw DataError(e.path + ": " + err.what());
    }
    if (keep_waveforms) c.wave = std::move(w);
    clips.push_back(std::move(c));
  }
  return clips;
}

std::vector<std::vector<int>> label_matrix(const std::vector<Clip>& clips) {
  std::vector<std::vector<int>> out;
  for (const auto& c : clips) {
    if (c.labels.empty()) throw DataError(c.path + ": clip has no labels");
    if (!out.empty() && c.labels.size() != out.front().size())
      throw DataError(c.path + ": label width differs from earlier clips");
    out.push_back(c.labels);
  }
  return out;
}

}  // namespace sslam::data

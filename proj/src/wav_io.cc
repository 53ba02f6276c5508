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

// WAV, spectrogram-cache and graymap file formats.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "sslam/dsp.h"
#include "sslam/errors.h"
#include "sslam/le_io.h"

namespace sslam::dsp {

namespace {

constexpr char kCacheMagic[8] = {'S', 'S', 'L', 'A', 'M', 'S', 'P', 'C'};
constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  const std::vector<char> bytes = le::read_file(path);
  le::Reader r(bytes, path.string());
  if (r.tag() != "RIFF") throw DataError(path.string() + ": not a RIFF file");
  r.u32();
  if (r.tag() != "WAVE") throw DataError(path.string() + ": not a WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (!r.done()) {
    const std::string id = r.tag();
    const std::uint32_t size = r.u32();
    if (id == "fmt ") {
      const size_t start = r.pos();
      format = r.u16();
      channels = r.u16();
      rate = r.u32();
      r.u32();  // byte rate
      r.u16();  // block align
      bits = r.u16();
      if (format == kFormatExtensible && size >= 40) {
        r.u16();  // cb size
        r.u16();  // valid bits
        r.u32();  // channel mask
        format = r.u16();
      }
      r.seek(start + size + (size & 1));
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw DataError(path.string() + ": data before fmt chunk");
      if (channels != 1)
        throw DataError(path.string() + ": only mono audio is supported");
      if (rate == 0) throw DataError(path.string() + ": zero sample rate");
      Waveform w;
      w.sample_rate = static_cast<int>(rate);
      if (format == kFormatPcm && bits == 16) {
        w.samples.resize(size / 2);
        for (auto& s : w.samples) s = static_cast<std::int16_t>(r.u16()) / 32768.0;
      } else if (format == kFormatFloat && bits == 32) {
        w.samples.resize(size / 4);
        for (auto& s : w.samples) s = r.f32();
      } else {
        throw DataError(path.string() +
                        ": unsupported encoding (need 16-bit PCM or 32-bit float)");
      }
      return w;
    } else {
      r.seek(r.pos() + size + (size & 1));
    }
  }
  throw DataError(path.string() + ": no data chunk");
}

void write_wav(const std::filesystem::path& path, const Waveform& w,
               WavEncoding encoding) {
  if (w.sample_rate <= 0) throw std::invalid_argument("write_wav: sample_rate <= 0");
  const bool pcm = encoding == WavEncoding::kPcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint32_t data_size =
      static_cast<std::uint32_t>(w.samples.size() * (bits / 8));
  le::Writer out;
  out.raw("RIFF");
  out.u32(36 + data_size);
  out.raw("WAVE");
  out.raw("fmt ");
  out.u32(16);
  out.u16(pcm ? kFormatPcm : kFormatFloat);
  out.u16(1);
  out.u32(static_cast<std::uint32_t>(w.sample_rate));
  out.u32(static_cast<std::uint32_t>(w.sample_rate) * (bits / 8));
  out.u16(bits / 8);
  out.u16(bits);
  out.raw("data");
  out.u32(data_size);
  for (double s : w.samples) {
    if (pcm) {
      const double c = std::clamp(s, -1.0, 32767.0 / 32768.0);
      out.u16(static_cast<std::uint16_t>(
          static_cast<std::int16_t>(std::lround(c * 32768.0))));
    } else {
      out.f32(static_cast<float>(s));
    }
  }
  out.save(path);
}

void write_spectrogram_cache(const std::filesystem::path& path,
                             const LogMelSpectrogram& s) {
  le::Writer out;
  out.raw(std::string_view(kCacheMagic, 8));
  out.u32(kSpectrogramCacheVersion);
  out.u32(static_cast<std::uint32_t>(s.frames()));
  out.u32(static_cast<std::uint32_t>(s.bins()));
  for (Eigen::Index i = 0; i < s.data.size(); ++i)
    out.f32(static_cast<float>(s.data.data()[i]));
  out.save(path);
}

LogMelSpectrogram read_spectrogram_cache(const std::filesystem::path& path) {
  const std::vector<char> bytes = le::read_file(path);
  le::Reader r(bytes, path.string());
  if (r.raw(8) != std::string_view(kCacheMagic, 8))
    throw DataError(path.string() + ": bad spectrogram cache magic");
  const std::uint32_t version = r.u32();
  if (version != kSpectrogramCacheVersion)
    throw DataError(path.string() + ": unsupported cache version " +
                    std::to_string(version));
  const std::uint32_t t = r.u32();
  const std::uint32_t f = r.u32();
  LogMelSpectrogram s;
  s.data.resize(t, f);
  for (Eigen::Index i = 0; i < s.data.size(); ++i) s.data.data()[i] = r.f32();
  if (!r.done()) throw DataError(path.string() + ": trailing bytes in cache");
  return s;
}

void write_pgm(const std::filesystem::path& path, const LogMelSpectrogram& s) {
  if (s.data.size() == 0) throw std::invalid_argument("write_pgm: empty spectrogram");
  const double lo = s.data.minCoeff();
  const double hi = s.data.maxCoeff();
  const double range = hi > lo ? hi - lo : 1.0;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P5\n" << s.frames() << " " << s.bins() << "\n255\n";
  for (int m = s.bins() - 1; m >= 0; --m) {
    for (int t = 0; t < s.frames(); ++t) {
      const double v = (s.data(t, m) - lo) / range;
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
  }
}

}  // namespace sslam::dsp

// Copyright 2026 The AFK Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef AFK_WAV_HPP_
#define AFK_WAV_HPP_

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "afk/error.hpp"
#include "afk/rir.hpp"

namespace afk {

namespace wav_detail {

inline std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint16_t read_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

inline void write_u16(std::ostream& out, std::uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(b, 2);
}

}  // namespace wav_detail

/// Reads a mono WAV file (16-bit PCM or 32-bit IEEE float). Multi-channel
/// files are mixed down by taking channel 0.
inline ImpulseResponse read_wav(const std::string& path) {
  using namespace wav_detail;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open WAV file: " + path);

  char riff[4];
  in.read(riff, 4);
  std::uint32_t riff_size = read_u32(in);
  (void)riff_size;
  char wave[4];
  in.read(wave, 4);
  if (!in || std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(wave, "WAVE", 4) != 0)
    throw IoError("not a RIFF/WAVE file: " + path);

  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
  bool have_fmt = false;
  std::vector<double> samples;

  while (in) {
    char id[4];
    in.read(id, 4);
    if (!in) break;
    std::uint32_t size = read_u32(in);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      format = read_u16(in);
      channels = read_u16(in);
      sample_rate = read_u32(in);
      read_u32(in);  // byte rate
      read_u16(in);  // block align
      bits = read_u16(in);
      if (size > 16) in.seekg(size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (!have_fmt) throw IoError("WAV data chunk before fmt: " + path);
      if (channels == 0) throw IoError("WAV has zero channels: " + path);
      std::vector<char> raw(size);
      in.read(raw.data(), size);
      if (format == 1 && bits == 16) {
        std::size_t frames = size / (2 * channels);
        samples.resize(frames);
        for (std::size_t i = 0; i < frames; ++i) {
          std::int16_t v;
          std::memcpy(&v, raw.data() + i * 2 * channels, 2);
          samples[i] = static_cast<double>(v) / 32768.0;
        }
      } else if (format == 3 && bits == 32) {
        std::size_t frames = size / (4 * channels);
        samples.resize(frames);
        for (std::size_t i = 0; i < frames; ++i) {
          float v;
          std::memcpy(&v, raw.data() + i * 4 * channels, 4);
          samples[i] = static_cast<double>(v);
        }
      } else {
        throw IoError("unsupported WAV encoding (format=" + std::to_string(format) +
                      ", bits=" + std::to_string(bits) + "): " + path);
      }
      break;
    } else {
      // Skip unknown chunk (chunks are word-aligned).
      in.seekg(size + (size & 1), std::ios::cur);
    }
  }
  if (samples.empty()) throw IoError("WAV has no samples: " + path);
  return ImpulseResponse(std::move(samples), static_cast<int>(sample_rate));
}

/// Writes a mono 32-bit float WAV. Output is byte-deterministic.
inline void write_wav(const std::string& path, const ImpulseResponse& ir) {
  using namespace wav_detail;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write WAV file: " + path);

  const std::uint32_t data_size = static_cast<std::uint32_t>(ir.samples.size() * 4);
  out.write("RIFF", 4);
  write_u32(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_u32(out, 16);
  write_u16(out, 3);  // IEEE float
  write_u16(out, 1);  // mono
  write_u32(out, static_cast<std::uint32_t>(ir.sample_rate));
  write_u32(out, static_cast<std::uint32_t>(ir.sample_rate) * 4);
  write_u16(out, 4);
  write_u16(out, 32);
  out.write("data", 4);
  write_u32(out, data_size);
  for (double v : ir.samples) {
    float f = static_cast<float>(v);
    char b[4];
    std::memcpy(b, &f, 4);
    out.write(b, 4);
  }
  if (!out) throw IoError("short write on WAV file: " + path);
}

}  // namespace afk

#endif  // AFK_WAV_HPP_

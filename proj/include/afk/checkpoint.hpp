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

#ifndef AFK_CHECKPOINT_HPP_
#define AFK_CHECKPOINT_HPP_

#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "afk/error.hpp"
#include "afk/field.hpp"

namespace afk {

// ---------------------------------------------------------------------------
// Checkpoint container: little-endian binary, magic "NAFC".
// header: magic[4], version u32, then config as u32 in order
//   K, L, d, hidden_layers, window, hop, fft, rir_length, sample_rate
// flags: u8 has_base, u8 has_lora
// base section: layers in model order, weight row-major f32 then bias f32
// lora section: rank u32, then per trunk layer A then B, row-major f32
// ---------------------------------------------------------------------------

struct Checkpoint {
  FieldConfig config;
  std::optional<ModelParams> params;
  std::optional<LoraAdapterSet> adapters;
};

namespace checkpoint_detail {

constexpr char kMagic[4] = {'N', 'A', 'F', 'C'};
constexpr std::uint32_t kVersion = 1;

inline void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}

inline std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

inline void write_f32_block(std::ostream& out, const std::vector<double>& values) {
  std::vector<float> buf(values.begin(), values.end());
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

inline void read_f32_block(std::istream& in, std::vector<double>& values) {
  std::vector<float> buf(values.size());
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = buf[i];
}

}  // namespace checkpoint_detail

inline void save_checkpoint(const std::string& path, const FieldConfig& config,
                            const ModelParams* params,
                            const LoraAdapterSet* adapters) {
  using namespace checkpoint_detail;
  config.check_valid();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(config.num_bounce_points));
  write_u32(out, static_cast<std::uint32_t>(config.encoding_levels));
  write_u32(out, static_cast<std::uint32_t>(config.hidden_width));
  write_u32(out, static_cast<std::uint32_t>(config.hidden_layers));
  write_u32(out, static_cast<std::uint32_t>(config.stft.window));
  write_u32(out, static_cast<std::uint32_t>(config.stft.hop));
  write_u32(out, static_cast<std::uint32_t>(config.stft.fft));
  write_u32(out, static_cast<std::uint32_t>(config.rir_length));
  write_u32(out, static_cast<std::uint32_t>(config.sample_rate));
  const std::uint8_t has_base = params ? 1 : 0;
  const std::uint8_t has_lora = adapters ? 1 : 0;
  out.write(reinterpret_cast<const char*>(&has_base), 1);
  out.write(reinterpret_cast<const char*>(&has_lora), 1);
  if (params) {
    for (const Dense& layer : params->layers) {
      write_f32_block(out, layer.w.data);
      write_f32_block(out, layer.b);
    }
  }
  if (adapters) {
    write_u32(out, static_cast<std::uint32_t>(adapters->rank));
    for (std::size_t i = 0; i < adapters->a.size(); ++i) {
      write_f32_block(out, adapters->a[i].data);
      write_f32_block(out, adapters->b[i].data);
    }
  }
  if (!out) throw IoError("short write on checkpoint: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  using namespace checkpoint_detail;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("bad checkpoint magic: " + path);
  const std::uint32_t version = read_u32(in);
  if (version != kVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ckpt;
  FieldConfig& cfg = ckpt.config;
  cfg.num_bounce_points = static_cast<int>(read_u32(in));
  cfg.encoding_levels = static_cast<int>(read_u32(in));
  cfg.hidden_width = static_cast<int>(read_u32(in));
  cfg.hidden_layers = static_cast<int>(read_u32(in));
  cfg.stft.window = static_cast<int>(read_u32(in));
  cfg.stft.hop = static_cast<int>(read_u32(in));
  cfg.stft.fft = static_cast<int>(read_u32(in));
  cfg.rir_length = static_cast<int>(read_u32(in));
  cfg.sample_rate = static_cast<int>(read_u32(in));
  if (!in) throw IoError("truncated checkpoint header: " + path);
  cfg.check_valid();

  std::uint8_t has_base = 0, has_lora = 0;
  in.read(reinterpret_cast<char*>(&has_base), 1);
  in.read(reinterpret_cast<char*>(&has_lora), 1);

  if (has_base) {
    // Shapes are implied by the config; allocate, then fill.
    ModelParams p;
    const std::size_t d = cfg.hidden_width;
    auto push = [&p](std::size_t rows, std::size_t cols) {
      Dense layer;
      layer.w = Matrix(rows, cols);
      layer.b.assign(rows, 0.0);
      p.layers.push_back(std::move(layer));
    };
    push(d, cfg.projector_in());
    push(d, cfg.fusion_in());
    for (int i = 0; i < cfg.hidden_layers; ++i) push(d, d);
    push(cfg.output_dim(), d);
    for (Dense& layer : p.layers) {
      read_f32_block(in, layer.w.data);
      read_f32_block(in, layer.b);
    }
    ckpt.params = std::move(p);
  }
  if (has_lora) {
    LoraAdapterSet set;
    set.rank = static_cast<int>(read_u32(in));
    if (set.rank < 1) throw IoError("checkpoint lora rank must be >= 1");
    const std::size_t d = cfg.hidden_width;
    for (int i = 0; i < cfg.hidden_layers; ++i) {
      Matrix a(d, set.rank);
      Matrix b(d, set.rank);
      read_f32_block(in, a.data);
      read_f32_block(in, b.data);
      set.a.push_back(std::move(a));
      set.b.push_back(std::move(b));
    }
    ckpt.adapters = std::move(set);
  }
  if (!in) throw IoError("truncated checkpoint: " + path);
  return ckpt;
}

}  // namespace afk

#endif  // AFK_CHECKPOINT_HPP_

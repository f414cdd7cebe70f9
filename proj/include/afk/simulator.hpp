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

#ifndef AFK_SIMULATOR_HPP_
#define AFK_SIMULATOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "afk/error.hpp"
#include "afk/filterbank.hpp"
#include "afk/manifest.hpp"
#include "afk/random.hpp"
#include "afk/rir.hpp"
#include "afk/vec3.hpp"
#include "afk/wav.hpp"

namespace afk {

/// Rectangular room for image-source simulation. Absorption is per wall
/// (-x,+x,-y,+y,-z,+z) and per band; coefficients are energy fractions.
struct ShoeboxRoom {
  Vec3 dims;
  std::vector<std::array<double, 6>> absorption;  // [band][wall]
  int sample_rate = 16000;
  double speed_of_sound = 343.0;

  static ShoeboxRoom uniform(Vec3 dims, double alpha, int sample_rate) {
    ShoeboxRoom room;
    room.dims = dims;
    room.absorption = {{alpha, alpha, alpha, alpha, alpha, alpha}};
    room.sample_rate = sample_rate;
    return room;
  }

  void check_valid() const {
    if (!(dims.x > 0.0 && dims.y > 0.0 && dims.z > 0.0))
      throw InvalidInputError("room dimensions must be positive");
    if (absorption.empty()) throw InvalidInputError("room needs absorption bands");
    for (const auto& band : absorption) {
      for (double a : band) {
        if (!(a > 0.0 && a <= 1.0))
          throw InvalidInputError("absorption must be in (0, 1]");
      }
    }
    if (sample_rate <= 0) throw InvalidInputError("sample rate must be positive");
  }

  bool frequency_flat() const {
    for (std::size_t b = 1; b < absorption.size(); ++b) {
      if (absorption[b] != absorption[0]) return false;
    }
    return true;
  }

  double volume() const { return dims.x * dims.y * dims.z; }

  double surface() const {
    return 2.0 * (dims.x * dims.y + dims.y * dims.z + dims.x * dims.z);
  }

  /// Sabine estimate 0.161 V / (sum of S_i * a_i) for one absorption band.
  double sabine_rt60(std::size_t band = 0) const {
    const auto& a = absorption[band];
    const double sx = dims.y * dims.z;
    const double sy = dims.x * dims.z;
    const double sz = dims.x * dims.y;
    const double absorbing =
        sx * (a[0] + a[1]) + sy * (a[2] + a[3]) + sz * (a[4] + a[5]);
    return 0.161 * volume() / absorbing;
  }
};

namespace simulator_detail {

/// One image-source pass with fixed per-wall reflection coefficients
/// (amplitude domain). Contributions are 1/d scaled and deposited with a
/// two-tap linear-interpolated fractional delay.
inline void image_source_pass(const ShoeboxRoom& room, const Vec3& src,
                              const Vec3& rcv, int max_order,
                              const std::array<double, 6>& beta,
                              std::vector<double>& out) {
  const double fs = room.sample_rate;
  const double c = room.speed_of_sound;
  const int n_samples = static_cast<int>(out.size());
  const double max_dist = c * n_samples / fs;

  const double L[3] = {room.dims.x, room.dims.y, room.dims.z};
  const double s[3] = {src.x, src.y, src.z};
  const double r[3] = {rcv.x, rcv.y, rcv.z};

  // Per-axis block count: bounded by the reflection order and by the RIR
  // length (an image farther than c*T never lands inside the buffer).
  int n_axis[3];
  for (int a = 0; a < 3; ++a) {
    const int by_order = max_order / 2 + 1;
    const int by_length = static_cast<int>(std::ceil(max_dist / (2.0 * L[a])));
    n_axis[a] = std::min(by_order, by_length);
  }

  for (int mx = -n_axis[0]; mx <= n_axis[0]; ++mx) {
    for (int my = -n_axis[1]; my <= n_axis[1]; ++my) {
      for (int mz = -n_axis[2]; mz <= n_axis[2]; ++mz) {
        for (int q = 0; q <= 1; ++q) {
          const int order_x = std::abs(2 * mx - q);
          if (order_x > max_order) continue;
          const double img_x = (1 - 2 * q) * s[0] + 2 * mx * L[0];
          const double refl_x = std::pow(beta[0], std::abs(mx - q)) *
                                std::pow(beta[1], std::abs(mx));
          for (int j = 0; j <= 1; ++j) {
            const int order_y = std::abs(2 * my - j);
            if (order_x + order_y > max_order) continue;
            const double img_y = (1 - 2 * j) * s[1] + 2 * my * L[1];
            const double refl_y = std::pow(beta[2], std::abs(my - j)) *
                                  std::pow(beta[3], std::abs(my));
            for (int k = 0; k <= 1; ++k) {
              const int order = order_x + order_y + std::abs(2 * mz - k);
              if (order > max_order) continue;
              const double img_z = (1 - 2 * k) * s[2] + 2 * mz * L[2];
              const double refl_z = std::pow(beta[4], std::abs(mz - k)) *
                                    std::pow(beta[5], std::abs(mz));

              const double dx = img_x - r[0];
              const double dy = img_y - r[1];
              const double dz = img_z - r[2];
              const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
              const double delay = dist / c * fs;
              const int i0 = static_cast<int>(std::floor(delay));
              if (i0 >= n_samples) continue;

              const double amp = refl_x * refl_y * refl_z / dist;
              const double frac = delay - i0;
              if (i0 >= 0) out[i0] += amp * (1.0 - frac);
              if (i0 + 1 < n_samples && i0 + 1 >= 0) out[i0 + 1] += amp * frac;
            }
          }
        }
      }
    }
  }
}

}  // namespace simulator_detail

/// Image-source RIR up to max_order reflections. Frequency-flat rooms run a
/// single broadband pass; frequency-dependent rooms run one pass per band
/// with that band's wall coefficients, band-filter each pass, and sum.
inline ImpulseResponse image_source_rir(const ShoeboxRoom& room, const Vec3& src,
                                        const Vec3& rcv, int max_order,
                                        double length_s) {
  room.check_valid();
  if (max_order < 0) throw InvalidInputError("max_order must be >= 0");
  if (!(length_s > 0.0)) throw InvalidInputError("length must be positive");
  auto inside = [&](const Vec3& p) {
    return p.x > 0.0 && p.x < room.dims.x && p.y > 0.0 && p.y < room.dims.y &&
           p.z > 0.0 && p.z < room.dims.z;
  };
  if (!inside(src) || !inside(rcv))
    throw OutOfRoomError("source and receiver must lie strictly inside the room");
  if (distance(src, rcv) == 0.0)
    throw CoincidentEndpointsError("source and receiver coincide");

  const int n_samples = static_cast<int>(std::lround(length_s * room.sample_rate));
  if (n_samples < 1) throw InvalidInputError("length shorter than one sample");

  auto to_beta = [](const std::array<double, 6>& alpha) {
    std::array<double, 6> beta;
    for (int w = 0; w < 6; ++w) beta[w] = std::sqrt(1.0 - alpha[w]);
    return beta;
  };

  ImpulseResponse out;
  out.sample_rate = room.sample_rate;
  out.samples.assign(n_samples, 0.0);

  if (room.frequency_flat()) {
    simulator_detail::image_source_pass(room, src, rcv, max_order,
                                        to_beta(room.absorption[0]), out.samples);
    return out;
  }

  BandSpec bands = BandSpec::standard();
  if (bands.size() != room.absorption.size())
    throw InvalidInputError("room band count must match the standard band spec");
  for (std::size_t b = 0; b < room.absorption.size(); ++b) {
    ImpulseResponse pass;
    pass.sample_rate = room.sample_rate;
    pass.samples.assign(n_samples, 0.0);
    simulator_detail::image_source_pass(room, src, rcv, max_order,
                                        to_beta(room.absorption[b]), pass.samples);
    ImpulseResponse filtered = band_filter(pass, bands.centers_hz[b]);
    for (int i = 0; i < n_samples; ++i) out.samples[i] += filtered.samples[i];
  }
  return out;
}

/// Recipe for a synthetic corpus standing in for a large external RIR set.
struct CorpusRecipe {
  int rooms = 20;
  int pairs_per_room = 10;
  // The last room may carry a different pair count so it can serve as an
  // evaluation target (enrollment + held-out positions).
  int target_room_pairs = 0;  // 0 = same as pairs_per_room
  Vec3 dims_min{3.0, 2.5, 2.2};
  Vec3 dims_max{9.0, 7.0, 4.0};
  double absorption_min = 0.08;
  double absorption_max = 0.6;
  bool frequency_dependent = false;
  int sample_rate = 16000;
  double rir_length_s = 0.5;
  int max_order = 40;
};

struct CorpusPaths {
  std::string dir;
  std::string rir_manifest;  // <dir>/rirs.jsonl
  std::string room_table;    // <dir>/rooms.jsonl
};

namespace simulator_detail {

inline std::string zero_pad(int v, int width) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%0*d", width, v);
  return buf;
}

inline Vec3 random_interior_point(Rng& rng, const Vec3& dims, double margin) {
  return {rng.uniform(margin, dims.x - margin),
          rng.uniform(margin, dims.y - margin),
          rng.uniform(margin, dims.z - margin)};
}

}  // namespace simulator_detail

/// Generates one WAV per (room, pair) plus rirs.jsonl / rooms.jsonl.
/// Every room and record derives its own RNG stream from (seed, index), so
/// output is byte-deterministic per seed.
inline CorpusPaths generate_corpus(const CorpusRecipe& recipe, std::uint64_t seed,
                                   const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "wav", ec);
  if (ec) throw IoError("cannot create corpus directory: " + out_dir);
  if (recipe.rooms < 1 || recipe.pairs_per_room < 1)
    throw InvalidInputError("corpus recipe needs rooms >= 1 and pairs >= 1");

  BandSpec bands = BandSpec::standard();
  std::vector<RoomEntry> rooms;
  std::vector<RirManifestEntry> rirs;

  for (int ri = 0; ri < recipe.rooms; ++ri) {
    Rng room_rng(mix_seed(seed, static_cast<std::uint64_t>(ri)));
    ShoeboxRoom room;
    room.dims = {room_rng.uniform(recipe.dims_min.x, recipe.dims_max.x),
                 room_rng.uniform(recipe.dims_min.y, recipe.dims_max.y),
                 room_rng.uniform(recipe.dims_min.z, recipe.dims_max.z)};
    room.sample_rate = recipe.sample_rate;
    if (recipe.frequency_dependent) {
      room.absorption.resize(bands.size());
      for (std::size_t b = 0; b < bands.size(); ++b) {
        const double alpha =
            room_rng.uniform(recipe.absorption_min, recipe.absorption_max);
        room.absorption[b] = {alpha, alpha, alpha, alpha, alpha, alpha};
      }
    } else {
      const double alpha =
          room_rng.uniform(recipe.absorption_min, recipe.absorption_max);
      room.absorption = {{alpha, alpha, alpha, alpha, alpha, alpha}};
    }

    const std::string room_id = "room" + simulator_detail::zero_pad(ri, 3);
    RoomEntry entry;
    entry.room_id = room_id;
    entry.bbox = {{0.0, 0.0, 0.0}, room.dims};
    entry.dims = room.dims;
    rooms.push_back(entry);

    const bool is_target = ri == recipe.rooms - 1 && recipe.target_room_pairs > 0;
    const int pairs = is_target ? recipe.target_room_pairs : recipe.pairs_per_room;
    const double margin = 0.3;
    for (int pi = 0; pi < pairs; ++pi) {
      Rng pair_rng(mix_seed(seed, (static_cast<std::uint64_t>(ri) << 20) + pi + 7));
      Vec3 src = simulator_detail::random_interior_point(pair_rng, room.dims, margin);
      Vec3 rcv = simulator_detail::random_interior_point(pair_rng, room.dims, margin);
      while (distance(src, rcv) < 0.2) {
        rcv = simulator_detail::random_interior_point(pair_rng, room.dims, margin);
      }

      ImpulseResponse ir =
          image_source_rir(room, src, rcv, recipe.max_order, recipe.rir_length_s);

      const std::string rir_id =
          room_id + "_p" + simulator_detail::zero_pad(pi, 3);
      const std::string rel_wav = "wav/" + rir_id + ".wav";
      write_wav((fs::path(out_dir) / rel_wav).string(), ir);

      RirManifestEntry rec;
      rec.rir_id = rir_id;
      rec.room_id = room_id;
      rec.wav_path = rel_wav;
      rec.src = src;
      rec.rcv = rcv;
      rec.sample_rate = recipe.sample_rate;
      rirs.push_back(rec);
    }
  }

  CorpusPaths paths;
  paths.dir = out_dir;
  paths.rir_manifest = (fs::path(out_dir) / "rirs.jsonl").string();
  paths.room_table = (fs::path(out_dir) / "rooms.jsonl").string();
  write_jsonl(paths.rir_manifest, rirs);
  write_jsonl(paths.room_table, rooms);
  return paths;
}

}  // namespace afk

#endif  // AFK_SIMULATOR_HPP_

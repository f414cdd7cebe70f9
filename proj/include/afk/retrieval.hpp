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

#ifndef AFK_RETRIEVAL_HPP_
#define AFK_RETRIEVAL_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "afk/error.hpp"
#include "afk/manifest.hpp"
#include "afk/metrics.hpp"
#include "afk/random.hpp"
#include "afk/rir.hpp"
#include "afk/vec3.hpp"
#include "afk/wav.hpp"

namespace afk {

/// One indexed corpus RIR with its retrieval key.
struct RirRecord {
  std::string rir_id;
  std::string room_id;
  Vec3 src;
  Vec3 rcv;
  Rt60Fingerprint fingerprint;
};

/// Immutable fingerprint index over a corpus; queries are exact full scans.
/// The sidecar persists only the band count, so `bands` is empty after a
/// load; queries depend on num_bands alone.
struct RetrievalIndex {
  std::vector<RirRecord> records;
  BandSpec bands;
  std::size_t num_bands = 0;
  int skipped_rows = 0;  // manifest rows dropped during build

  std::size_t dim() const { return num_bands; }
};

struct QueryHit {
  const RirRecord* record;
  double distance;
};

/// Rooms ordered by how often their RIRs were retrieved; ties break by best
/// (smallest) distance, then lexicographic room id.
struct RoomRanking {
  struct Entry {
    std::string room_id;
    int frequency = 0;
    double best_distance = 0.0;
  };
  std::vector<Entry> entries;
};

/// Builds the index by fingerprinting every manifest row. Rows whose decay
/// is too short to fingerprint are skipped and counted; unreadable WAVs are
/// an error carrying the rir_id.
inline RetrievalIndex build_index(const std::vector<RirManifestEntry>& manifest,
                                  const std::string& manifest_path,
                                  const BandSpec& bands) {
  if (manifest.empty()) throw EmptyIndexError("manifest has no records");
  RetrievalIndex index;
  index.bands = bands;
  index.num_bands = bands.size();
  index.records.reserve(manifest.size());
  for (const auto& row : manifest) {
    ImpulseResponse ir;
    try {
      ir = read_wav(resolve_wav_path(manifest_path, row.wav_path));
    } catch (const IoError& e) {
      throw IoError("rir " + row.rir_id + ": " + e.what());
    }
    RirRecord rec;
    rec.rir_id = row.rir_id;
    rec.room_id = row.room_id;
    rec.src = row.src;
    rec.rcv = row.rcv;
    try {
      rec.fingerprint = multiband_rt60(ir, bands);
    } catch (const Error&) {
      ++index.skipped_rows;
      continue;
    }
    index.records.push_back(std::move(rec));
  }
  if (index.records.empty())
    throw EmptyIndexError("no manifest row could be fingerprinted");
  return index;
}

/// Exact M-nearest-neighbor query by Euclidean distance over fingerprints.
/// Ties break by rir_id so results are reproducible.
inline std::vector<QueryHit> query_nearest(const RetrievalIndex& index,
                                           const Rt60Fingerprint& query, int m) {
  if (m < 1) throw InvalidInputError("m must be >= 1");
  if (query.size() != index.dim())
    throw DimensionMismatchError("query has " + std::to_string(query.size()) +
                                 " bands, index has " + std::to_string(index.dim()));
  std::vector<QueryHit> hits;
  hits.reserve(index.records.size());
  for (const auto& rec : index.records) {
    double sq = 0.0;
    for (std::size_t b = 0; b < query.size(); ++b) {
      const double d = query.rt60_s[b] - rec.fingerprint.rt60_s[b];
      sq += d * d;
    }
    hits.push_back({&rec, std::sqrt(sq)});
  }
  const std::size_t take = std::min<std::size_t>(m, hits.size());
  auto less = [](const QueryHit& a, const QueryHit& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.record->rir_id < b.record->rir_id;
  };
  std::partial_sort(hits.begin(), hits.begin() + take, hits.end(), less);
  hits.resize(take);
  return hits;
}

/// Frequency ranking over the union (with multiplicity) of per-enrollment
/// nearest-neighbor results. Each retrieved RIR contributes its room once.
inline RoomRanking rank_rooms(const RetrievalIndex& index,
                              const std::vector<Rt60Fingerprint>& enrollment,
                              int m) {
  if (enrollment.empty()) throw InvalidInputError("enrollment set is empty");
  std::map<std::string, RoomRanking::Entry> by_room;
  for (const auto& fp : enrollment) {
    for (const QueryHit& hit : query_nearest(index, fp, m)) {
      auto [it, inserted] = by_room.try_emplace(hit.record->room_id);
      if (inserted) {
        it->second.room_id = hit.record->room_id;
        it->second.best_distance = hit.distance;
      }
      it->second.frequency += 1;
      it->second.best_distance = std::min(it->second.best_distance, hit.distance);
    }
  }
  RoomRanking ranking;
  ranking.entries.reserve(by_room.size());
  for (auto& [id, entry] : by_room) ranking.entries.push_back(std::move(entry));
  std::sort(ranking.entries.begin(), ranking.entries.end(),
            [](const RoomRanking::Entry& a, const RoomRanking::Entry& b) {
              if (a.frequency != b.frequency) return a.frequency > b.frequency;
              if (a.best_distance != b.best_distance)
                return a.best_distance < b.best_distance;
              return a.room_id < b.room_id;
            });
  return ranking;
}

/// Top `limit` rooms of the ranking, in ranking order.
inline std::vector<std::string> select_pretraining_rooms(const RoomRanking& ranking,
                                                         int limit = 100) {
  if (limit < 1) throw InvalidInputError("limit must be >= 1");
  std::vector<std::string> out;
  const std::size_t take = std::min<std::size_t>(limit, ranking.entries.size());
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(ranking.entries[i].room_id);
  return out;
}

/// Uniform room sample without replacement, deterministic per seed. The
/// distinct-room list is sorted before shuffling so record order is
/// irrelevant.
inline std::vector<std::string> select_random_rooms(const RetrievalIndex& index,
                                                    int count, std::uint64_t seed) {
  std::set<std::string> distinct;
  for (const auto& rec : index.records) distinct.insert(rec.room_id);
  if (count < 0 || static_cast<std::size_t>(count) > distinct.size())
    throw NotEnoughRoomsError("requested " + std::to_string(count) + " of " +
                              std::to_string(distinct.size()) + " rooms");
  std::vector<std::string> rooms(distinct.begin(), distinct.end());
  Rng rng(seed);
  rng.shuffle(rooms);
  rooms.resize(count);
  return rooms;
}

struct RetrievedGeometry {
  std::string room_id;
  RoomEntry room;
};

/// Geometry of the best-ranked room that declares any; walks down the
/// ranking when the top room has none.
inline RetrievedGeometry retrieve_geometry(const RoomRanking& ranking,
                                           const std::vector<RoomEntry>& room_table) {
  std::map<std::string, const RoomEntry*> table;
  for (const auto& room : room_table) table[room.room_id] = &room;
  for (const auto& entry : ranking.entries) {
    auto it = table.find(entry.room_id);
    if (it == table.end()) continue;
    const RoomEntry& room = *it->second;
    const Vec3 ext = room.bbox.extent();
    const bool has_box = ext.x > 0.0 && ext.y > 0.0 && ext.z > 0.0;
    if (room.mesh_path || has_box) return {entry.room_id, room};
  }
  throw NoGeometryAvailableError("no ranked room declares geometry");
}

// ---------------------------------------------------------------------------
// Sidecar format: little-endian binary, magic "RTIX".
// header: magic[4], version u32, B u32, record count u64
// record: id, room_id (u32 length + UTF-8 bytes), 6 x f64 positions,
//         B x f64 fingerprint
// ---------------------------------------------------------------------------

namespace retrieval_detail {

constexpr char kMagic[4] = {'R', 'T', 'I', 'X'};
constexpr std::uint32_t kVersion = 1;

inline void write_string(std::ostream& out, const std::string& s) {
  const std::uint32_t len = static_cast<std::uint32_t>(s.size());
  out.write(reinterpret_cast<const char*>(&len), 4);
  out.write(s.data(), len);
}

inline std::string read_string(std::istream& in) {
  std::uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 4);
  std::string s(len, '\0');
  in.read(s.data(), len);
  return s;
}

inline void write_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), 8);
}

inline double read_f64(std::istream& in) {
  double v = 0.0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

}  // namespace retrieval_detail

inline void save_index(const RetrievalIndex& index, const std::string& path) {
  using namespace retrieval_detail;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write index sidecar: " + path);
  out.write(kMagic, 4);
  const std::uint32_t version = kVersion;
  out.write(reinterpret_cast<const char*>(&version), 4);
  const std::uint32_t b = static_cast<std::uint32_t>(index.dim());
  out.write(reinterpret_cast<const char*>(&b), 4);
  const std::uint64_t count = index.records.size();
  out.write(reinterpret_cast<const char*>(&count), 8);
  for (const auto& rec : index.records) {
    write_string(out, rec.rir_id);
    write_string(out, rec.room_id);
    write_f64(out, rec.src.x);
    write_f64(out, rec.src.y);
    write_f64(out, rec.src.z);
    write_f64(out, rec.rcv.x);
    write_f64(out, rec.rcv.y);
    write_f64(out, rec.rcv.z);
    for (double v : rec.fingerprint.rt60_s) write_f64(out, v);
  }
  if (!out) throw IoError("short write on index sidecar: " + path);
}

inline RetrievalIndex load_index(const std::string& path) {
  using namespace retrieval_detail;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open index sidecar: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("bad sidecar magic: " + path);
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  if (version != kVersion)
    throw IoError("unsupported sidecar version " + std::to_string(version));
  std::uint32_t b = 0;
  in.read(reinterpret_cast<char*>(&b), 4);
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), 8);
  if (b == 0 || count == 0) throw EmptyIndexError("sidecar holds no records");

  RetrievalIndex index;
  index.num_bands = b;
  index.records.resize(count);
  for (auto& rec : index.records) {
    rec.rir_id = read_string(in);
    rec.room_id = read_string(in);
    rec.src = {read_f64(in), read_f64(in), read_f64(in)};
    rec.rcv = {read_f64(in), read_f64(in), read_f64(in)};
    rec.fingerprint.rt60_s.resize(b);
    for (std::uint32_t i = 0; i < b; ++i) rec.fingerprint.rt60_s[i] = read_f64(in);
  }
  if (!in) throw IoError("truncated index sidecar: " + path);
  return index;
}

}  // namespace afk

#endif  // AFK_RETRIEVAL_HPP_

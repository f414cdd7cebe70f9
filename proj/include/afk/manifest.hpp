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

#ifndef AFK_MANIFEST_HPP_
#define AFK_MANIFEST_HPP_

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "afk/error.hpp"
#include "afk/geometry.hpp"
#include "afk/vec3.hpp"

namespace afk {

/// One corpus RIR: JSONL record binding a WAV to a room and an endpoint pair.
struct RirManifestEntry {
  std::string rir_id;
  std::string room_id;
  std::string wav_path;  // relative to the manifest file
  Vec3 src;
  Vec3 rcv;
  int sample_rate = 0;
};

/// One room: bounding box always, mesh and shoebox dims when known.
struct RoomEntry {
  std::string room_id;
  std::optional<std::string> mesh_path;
  BoundingBox bbox;
  std::optional<Vec3> dims;  // shoebox extents
};

/// One generation request: where to place source and receiver.
struct PairEntry {
  std::string pair_id;
  Vec3 src;
  Vec3 rcv;
};

namespace manifest_detail {

inline nlohmann::json vec_json(const Vec3& v) {
  return nlohmann::json::array({v.x, v.y, v.z});
}

inline Vec3 vec_from(const nlohmann::json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != 3)
    throw IoError("expected [x,y,z] for " + ctx);
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace manifest_detail

inline nlohmann::json to_json(const RirManifestEntry& e) {
  return nlohmann::json{{"rir_id", e.rir_id},
                        {"room_id", e.room_id},
                        {"wav_path", e.wav_path},
                        {"src", manifest_detail::vec_json(e.src)},
                        {"rcv", manifest_detail::vec_json(e.rcv)},
                        {"sample_rate", e.sample_rate}};
}

inline nlohmann::json to_json(const RoomEntry& e) {
  nlohmann::json j{{"room_id", e.room_id},
                   {"bbox", nlohmann::json::array({manifest_detail::vec_json(e.bbox.min_corner),
                                                   manifest_detail::vec_json(e.bbox.max_corner)})}};
  if (e.mesh_path) j["mesh_path"] = *e.mesh_path;
  if (e.dims) j["dims"] = manifest_detail::vec_json(*e.dims);
  return j;
}

inline nlohmann::json to_json(const PairEntry& e) {
  return nlohmann::json{{"pair_id", e.pair_id},
                        {"src", manifest_detail::vec_json(e.src)},
                        {"rcv", manifest_detail::vec_json(e.rcv)}};
}

inline RirManifestEntry rir_entry_from_json(const nlohmann::json& j) {
  RirManifestEntry e;
  try {
    e.rir_id = j.at("rir_id").get<std::string>();
    e.room_id = j.at("room_id").get<std::string>();
    e.wav_path = j.at("wav_path").get<std::string>();
    e.src = manifest_detail::vec_from(j.at("src"), "src");
    e.rcv = manifest_detail::vec_from(j.at("rcv"), "rcv");
    e.sample_rate = j.at("sample_rate").get<int>();
  } catch (const nlohmann::json::exception& ex) {
    throw IoError(std::string("bad RIR manifest record: ") + ex.what());
  }
  return e;
}

inline RoomEntry room_entry_from_json(const nlohmann::json& j) {
  RoomEntry e;
  try {
    e.room_id = j.at("room_id").get<std::string>();
    const auto& bbox = j.at("bbox");
    if (!bbox.is_array() || bbox.size() != 2)
      throw IoError("expected bbox:[min,max]");
    e.bbox.min_corner = manifest_detail::vec_from(bbox[0], "bbox min");
    e.bbox.max_corner = manifest_detail::vec_from(bbox[1], "bbox max");
    if (j.contains("mesh_path")) e.mesh_path = j.at("mesh_path").get<std::string>();
    if (j.contains("dims")) e.dims = manifest_detail::vec_from(j.at("dims"), "dims");
  } catch (const nlohmann::json::exception& ex) {
    throw IoError(std::string("bad room record: ") + ex.what());
  }
  return e;
}

template <typename Entry, typename FromJson>
std::vector<Entry> read_jsonl(const std::string& path, FromJson from) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);
  std::vector<Entry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw IoError(path + ":" + std::to_string(line_no) + ": invalid JSON");
    entries.push_back(from(j));
  }
  return entries;
}

inline std::vector<RirManifestEntry> read_rir_manifest(const std::string& path) {
  return read_jsonl<RirManifestEntry>(path, rir_entry_from_json);
}

inline PairEntry pair_entry_from_json(const nlohmann::json& j) {
  PairEntry e;
  try {
    e.pair_id = j.at("pair_id").get<std::string>();
    e.src = manifest_detail::vec_from(j.at("src"), "src");
    e.rcv = manifest_detail::vec_from(j.at("rcv"), "rcv");
  } catch (const nlohmann::json::exception& ex) {
    throw IoError(std::string("bad pair record: ") + ex.what());
  }
  return e;
}

inline std::vector<RoomEntry> read_room_table(const std::string& path) {
  return read_jsonl<RoomEntry>(path, room_entry_from_json);
}

inline std::vector<PairEntry> read_pair_manifest(const std::string& path) {
  return read_jsonl<PairEntry>(path, pair_entry_from_json);
}

template <typename Entry>
void write_jsonl(const std::string& path, const std::vector<Entry>& entries) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest: " + path);
  for (const auto& e : entries) out << to_json(e).dump() << "\n";
}

/// Resolves a wav_path stored relative to its manifest file.
inline std::string resolve_wav_path(const std::string& manifest_path,
                                    const std::string& wav_path) {
  namespace fs = std::filesystem;
  fs::path p(wav_path);
  if (p.is_absolute()) return wav_path;
  return (fs::path(manifest_path).parent_path() / p).string();
}

}  // namespace afk

#endif  // AFK_MANIFEST_HPP_

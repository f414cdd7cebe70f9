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

#ifndef AFK_CLI_HPP_
#define AFK_CLI_HPP_

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "afk/checkpoint.hpp"
#include "afk/error.hpp"
#include "afk/field.hpp"
#include "afk/manifest.hpp"
#include "afk/metrics.hpp"
#include "afk/retrieval.hpp"
#include "afk/simulator.hpp"
#include "afk/toml.hpp"
#include "afk/training.hpp"
#include "afk/wav.hpp"

namespace afk::cli {

/// Command-line misuse distinct from pipeline failures: exits with 2.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& message) : Error(message) {}
};

namespace detail {

inline BandSpec parse_bands(const std::string& text) {
  if (text.empty() || text == "default") return BandSpec::standard();
  std::vector<double> centers;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      centers.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("bad band center '" + item + "' in --bands");
    }
  }
  try {
    return BandSpec(centers);
  } catch (const Error& e) {
    throw UsageError(std::string("bad --bands: ") + e.what());
  }
}

/// Seed precedence: explicit flag, then AFK_SEED, then config, then 0.
inline std::uint64_t resolve_seed(bool flag_given, std::uint64_t flag_value,
                                  const TomlTable& config) {
  if (flag_given) return flag_value;
  if (const char* env = std::getenv("AFK_SEED")) {
    const std::string text(env);
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(text, &used, 10);
      if (used != text.size()) throw std::invalid_argument(text);
      return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
      throw UsageError("AFK_SEED must be an unsigned integer, got '" + text + "'");
    }
  }
  return static_cast<std::uint64_t>(config.get_int("run", "seed", 0));
}

inline TomlTable load_config(const std::string& path) {
  if (path.empty()) return TomlTable{};
  return load_toml(path);
}

inline FieldConfig field_config_from(const TomlTable& t) {
  FieldConfig c;
  c.num_bounce_points = static_cast<int>(t.get_int("model", "bounce_points", 32));
  c.encoding_levels = static_cast<int>(t.get_int("model", "levels", 8));
  c.hidden_width = static_cast<int>(t.get_int("model", "width", 256));
  c.hidden_layers = static_cast<int>(t.get_int("model", "layers", 4));
  c.stft.window = static_cast<int>(t.get_int("model", "window", 256));
  c.stft.hop = static_cast<int>(t.get_int("model", "hop", 128));
  c.stft.fft = static_cast<int>(t.get_int("model", "fft", 256));
  c.rir_length = static_cast<int>(t.get_int("model", "rir_length", 8000));
  c.sample_rate = static_cast<int>(t.get_int("model", "sample_rate", 16000));
  c.check_valid();
  return c;
}

inline TrainRecipe recipe_from(const TomlTable& t, const std::string& section,
                               std::uint64_t seed) {
  TrainRecipe r;
  r.epochs = static_cast<int>(t.get_int(section, "epochs", 100));
  r.batch_size = static_cast<int>(t.get_int(section, "batch_size", 8));
  r.step_size = t.get_double(section, "step_size", 1e-3);
  r.beta1 = t.get_double(section, "beta1", 0.9);
  r.beta2 = t.get_double(section, "beta2", 0.999);
  r.lora_rank = static_cast<int>(t.get_int(section, "rank", 1));
  r.seed = seed;
  return r;
}

inline Vec3 vec_from_array(const std::vector<double>& v, const std::string& key) {
  if (v.size() != 3) throw ConfigError(key + " must be [x, y, z]");
  return {v[0], v[1], v[2]};
}

inline CorpusRecipe corpus_recipe_from(const TomlTable& t) {
  CorpusRecipe r;
  r.rooms = static_cast<int>(t.get_int("corpus", "rooms", r.rooms));
  r.pairs_per_room =
      static_cast<int>(t.get_int("corpus", "pairs_per_room", r.pairs_per_room));
  r.target_room_pairs =
      static_cast<int>(t.get_int("corpus", "target_room_pairs", r.target_room_pairs));
  r.absorption_min = t.get_double("corpus", "absorption_min", r.absorption_min);
  r.absorption_max = t.get_double("corpus", "absorption_max", r.absorption_max);
  r.frequency_dependent =
      t.get_bool("corpus", "frequency_dependent", r.frequency_dependent);
  r.sample_rate = static_cast<int>(t.get_int("corpus", "sample_rate", r.sample_rate));
  r.rir_length_s = t.get_double("corpus", "duration_s", r.rir_length_s);
  r.max_order = static_cast<int>(t.get_int("corpus", "max_order", r.max_order));
  r.dims_min = vec_from_array(
      t.get_number_array("corpus", "dims_min",
                         {r.dims_min.x, r.dims_min.y, r.dims_min.z}),
      "dims_min");
  r.dims_max = vec_from_array(
      t.get_number_array("corpus", "dims_max",
                         {r.dims_max.x, r.dims_max.y, r.dims_max.z}),
      "dims_max");
  return r;
}

/// Resolved settings recorded next to every run's outputs; key order is
/// fixed so reruns are byte-identical.
class RunRecord {
 public:
  RunRecord(std::string subcommand, std::uint64_t seed) {
    set("run", "subcommand", "\"" + subcommand + "\"");
    set("run", "seed", std::to_string(seed));
  }

  void set(const std::string& section, const std::string& key, std::string value) {
    sections_[section][key] = std::move(value);
  }

  void set_int(const std::string& section, const std::string& key, long long v) {
    set(section, key, std::to_string(v));
  }

  void set_double(const std::string& section, const std::string& key, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    set(section, key, buf);
  }

  void set_string(const std::string& section, const std::string& key,
                  const std::string& v) {
    set(section, key, "\"" + v + "\"");
  }

  void set_bool(const std::string& section, const std::string& key, bool v) {
    set(section, key, v ? "true" : "false");
  }

  void write(const std::string& out_dir) const {
    std::ofstream out(std::filesystem::path(out_dir) / "run_config.toml");
    if (!out) throw IoError("cannot write run_config.toml under " + out_dir);
    bool first = true;
    for (const auto& [section, keys] : sections_) {
      if (!first) out << "\n";
      first = false;
      out << "[" << section << "]\n";
      for (const auto& [key, value] : keys) out << key << " = " << value << "\n";
    }
  }

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

inline void ensure_dir(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw IoError("cannot create output directory " + path + ": " + ec.message());
}

inline std::vector<std::string> read_room_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open room list: " + path);
  std::vector<std::string> rooms;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) rooms.push_back(line);
  }
  return rooms;
}

inline void write_room_list(const std::string& path, const std::vector<std::string>& rooms) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write room list: " + path);
  for (const auto& r : rooms) out << r << "\n";
}

inline void write_ranking_csv(const std::string& path, const RoomRanking& ranking) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write ranking: " + path);
  out << "room_id,frequency,best_distance\n";
  char line[160];
  for (const auto& e : ranking.entries) {
    std::snprintf(line, sizeof(line), "%s,%d,%.9f\n", e.room_id.c_str(), e.frequency,
                  e.best_distance);
    out << line;
  }
}

inline RoomRanking read_ranking_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ranking: " + path);
  RoomRanking ranking;
  std::string line;
  bool header = true;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::stringstream ss(line);
    RoomRanking::Entry e;
    std::string freq, dist;
    if (!std::getline(ss, e.room_id, ',') || !std::getline(ss, freq, ',') ||
        !std::getline(ss, dist))
      throw IoError(path + ":" + std::to_string(line_no) + ": bad ranking row");
    try {
      e.frequency = std::stoi(freq);
      e.best_distance = std::stod(dist);
    } catch (const std::exception&) {
      throw IoError(path + ":" + std::to_string(line_no) + ": bad ranking row");
    }
    ranking.entries.push_back(std::move(e));
  }
  return ranking;
}

inline void write_loss_csv(const std::string& path, const std::vector<double>& loss) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write loss trace: " + path);
  out << "epoch,loss\n";
  char line[80];
  for (std::size_t i = 0; i < loss.size(); ++i) {
    std::snprintf(line, sizeof(line), "%zu,%.9f\n", i, loss[i]);
    out << line;
  }
}

// -------------------------------------------------------------------------
// Subcommand option bags
// -------------------------------------------------------------------------

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool dry_run = false;
};

struct SimulateOpts {
  int rooms = -1;             // -1: take from config
  int pairs = -1;
  int target_room_pairs = -1;
  double duration_s = -1.0;
  int sample_rate = -1;
  bool frequency_dependent = false;
  bool frequency_dependent_given = false;
};

struct AnalyzeOpts {
  std::string rir_path;
  std::string ref_path;
  std::string bands = "default";
};

struct BuildIndexOpts {
  std::string rirs_path;
  std::string index_out;
  std::string bands = "default";
};

struct RetrieveOpts {
  std::string enrollment_path;
  std::string index_path;
  int m = 5;
  int limit = 100;
  bool random = false;
  int count = -1;  // -1: use limit
  std::string bands = "default";
};

struct PretrainOpts {
  std::string rirs_path;
  std::string rooms_path;
  std::string room_list_path;
};

struct FinetuneOpts {
  std::string base_path;
  std::string enrollment_path;
  std::string rooms_path;
  std::string room_id;
  std::string method = "lora";
  int rank = -1;  // -1: take from config
  std::string ranking_path;
};

struct GenerateOpts {
  std::string base_path;
  std::string adapters_path;
  std::string pairs_path;
  std::string rooms_path;
  std::string room_id;
  std::string ranking_path;
};

struct EvaluateOpts {
  std::string rirs_path;
  std::string rooms_path;
  std::string target_room;
  int enroll = -1;
  int m = -1;
  int limit = -1;
  bool with_oracle = false;
};

// -------------------------------------------------------------------------
// Subcommand bodies
// -------------------------------------------------------------------------

inline int run_simulate(const CommonOpts& common, const SimulateOpts& opts) {
  const TomlTable config = load_config(common.config_path);
  const std::uint64_t seed = resolve_seed(common.seed_given, common.seed, config);
  CorpusRecipe recipe = corpus_recipe_from(config);
  if (opts.rooms >= 0) recipe.rooms = opts.rooms;
  if (opts.pairs >= 0) recipe.pairs_per_room = opts.pairs;
  if (opts.target_room_pairs >= 0) recipe.target_room_pairs = opts.target_room_pairs;
  if (opts.duration_s > 0.0) recipe.rir_length_s = opts.duration_s;
  if (opts.sample_rate > 0) recipe.sample_rate = opts.sample_rate;
  if (opts.frequency_dependent_given)
    recipe.frequency_dependent = opts.frequency_dependent;

  const int last_pairs =
      recipe.target_room_pairs > 0 ? recipe.target_room_pairs : recipe.pairs_per_room;
  const int total = (recipe.rooms - 1) * recipe.pairs_per_room + last_pairs;
  if (common.dry_run) {
    std::cout << "plan: simulate " << recipe.rooms << " rooms, " << total
              << " RIRs at " << recipe.sample_rate << " Hz into " << common.out_dir
              << "\n";
    return 0;
  }
  ensure_dir(common.out_dir);
  const CorpusPaths paths = generate_corpus(recipe, seed, common.out_dir);

  RunRecord record("simulate", seed);
  record.set_int("corpus", "rooms", recipe.rooms);
  record.set_int("corpus", "pairs_per_room", recipe.pairs_per_room);
  record.set_int("corpus", "target_room_pairs", recipe.target_room_pairs);
  record.set_double("corpus", "absorption_min", recipe.absorption_min);
  record.set_double("corpus", "absorption_max", recipe.absorption_max);
  record.set_bool("corpus", "frequency_dependent", recipe.frequency_dependent);
  record.set_int("corpus", "sample_rate", recipe.sample_rate);
  record.set_double("corpus", "duration_s", recipe.rir_length_s);
  record.set_int("corpus", "max_order", recipe.max_order);
  record.write(common.out_dir);

  std::cout << "wrote " << total << " RIRs in " << recipe.rooms << " rooms under "
            << paths.dir << "\n";
  return 0;
}

inline int run_analyze(const CommonOpts& common, const AnalyzeOpts& opts) {
  const BandSpec bands = parse_bands(opts.bands);
  if (common.dry_run) {
    std::cout << "plan: analyze " << opts.rir_path << " with " << bands.size()
              << " bands\n";
    return 0;
  }
  const ImpulseResponse ir = read_wav(opts.rir_path);
  const Rt60Fingerprint fp = multiband_rt60(ir, bands);
  char line[80];
  for (std::size_t b = 0; b < bands.size(); ++b) {
    std::snprintf(line, sizeof(line), "band_hz %g rt60_s %.6f\n",
                  bands.centers_hz[b], fp.rt60_s[b]);
    std::cout << line;
  }
  std::snprintf(line, sizeof(line), "broadband_rt60_s %.6f\n",
                rt60_single(schroeder_edc(ir)));
  std::cout << line;
  std::snprintf(line, sizeof(line), "drr_db %.6f\n", drr(ir));
  std::cout << line;

  if (!opts.ref_path.empty()) {
    const ImpulseResponse ref = read_wav(opts.ref_path);
    const MetricErrors err = metric_errors(ir, ref, bands);
    std::snprintf(line, sizeof(line), "rt60_err_pct %.6f\n", err.rt60_err_pct);
    std::cout << line;
    std::snprintf(line, sizeof(line), "edf_err_db %.6f\n", err.edf_err_db);
    std::cout << line;
    std::snprintf(line, sizeof(line), "drr_err_db %.6f\n", err.drr_err_db);
    std::cout << line;
  }
  return 0;
}

inline int run_build_index(const CommonOpts& common, const BuildIndexOpts& opts) {
  const BandSpec bands = parse_bands(opts.bands);
  const auto manifest = read_rir_manifest(opts.rirs_path);
  if (common.dry_run) {
    std::cout << "plan: index " << manifest.size() << " RIRs with " << bands.size()
              << " bands into " << opts.index_out << "\n";
    return 0;
  }
  const RetrievalIndex index = build_index(manifest, opts.rirs_path, bands);
  save_index(index, opts.index_out);
  std::cout << "indexed " << index.records.size() << " records, skipped "
            << index.skipped_rows << "\n";
  return 0;
}

inline int run_retrieve(const CommonOpts& common, const RetrieveOpts& opts) {
  const TomlTable config = load_config(common.config_path);
  const std::uint64_t seed = resolve_seed(common.seed_given, common.seed, config);
  const RetrievalIndex index = load_index(opts.index_path);
  const int count = opts.count > 0 ? opts.count : opts.limit;

  if (common.dry_run) {
    std::cout << "plan: retrieve from index of " << index.records.size()
              << " records, mode " << (opts.random ? "random" : "ranked")
              << ", limit " << (opts.random ? count : opts.limit) << "\n";
    return 0;
  }
  ensure_dir(common.out_dir);

  RunRecord record("retrieve", seed);
  record.set_string("retrieval", "index", opts.index_path);
  record.set_bool("retrieval", "random", opts.random);

  std::vector<std::string> selected;
  if (opts.random) {
    selected = select_random_rooms(index, count, seed);
    record.set_int("retrieval", "count", count);
  } else {
    const BandSpec bands = parse_bands(opts.bands);
    if (bands.size() != index.dim())
      throw DimensionMismatchError("--bands has " + std::to_string(bands.size()) +
                                   " bands, index has " + std::to_string(index.dim()));
    const auto enrollment = read_rir_manifest(opts.enrollment_path);
    if (enrollment.empty()) throw InvalidInputError("enrollment manifest is empty");
    std::vector<Rt60Fingerprint> fps;
    for (const auto& row : enrollment) {
      const ImpulseResponse ir =
          read_wav(resolve_wav_path(opts.enrollment_path, row.wav_path));
      fps.push_back(multiband_rt60(ir, bands));
    }
    const RoomRanking ranking = rank_rooms(index, fps, opts.m);
    write_ranking_csv((std::filesystem::path(common.out_dir) / "ranking.csv").string(),
                      ranking);
    selected = select_pretraining_rooms(ranking, opts.limit);
    record.set_string("retrieval", "enrollment", opts.enrollment_path);
    record.set_int("retrieval", "m", opts.m);
    record.set_int("retrieval", "limit", opts.limit);
  }
  write_room_list(
      (std::filesystem::path(common.out_dir) / "selected_rooms.txt").string(), selected);
  record.write(common.out_dir);
  std::cout << "selected " << selected.size() << " rooms\n";
  return 0;
}

inline int run_pretrain(const CommonOpts& common, const PretrainOpts& opts) {
  const TomlTable config = load_config(common.config_path);
  const std::uint64_t seed = resolve_seed(common.seed_given, common.seed, config);
  const FieldConfig field_config = field_config_from(config);
  TrainRecipe recipe = recipe_from(config, "train", seed);
  recipe.mode = TrainRecipe::Mode::kPretrain;
  recipe.check_valid();

  const Corpus corpus = load_corpus(opts.rirs_path, opts.rooms_path);
  std::vector<std::string> rooms;
  if (!opts.room_list_path.empty()) {
    rooms = read_room_list(opts.room_list_path);
  } else {
    for (const auto& r : corpus.rooms) rooms.push_back(r.room_id);
  }

  int sample_count = 0;
  for (const auto& room : rooms)
    sample_count += static_cast<int>(corpus.room_rirs(room).size());
  if (common.dry_run) {
    std::cout << "plan: pretrain on " << rooms.size() << " rooms, " << sample_count
              << " RIRs, " << recipe.epochs << " epochs\n";
    return 0;
  }
  ensure_dir(common.out_dir);

  const TrainedModel model = pretrain(rooms, corpus, field_config, recipe);
  save_checkpoint((std::filesystem::path(common.out_dir) / "base.nafc").string(),
                  field_config, &model.params, nullptr);
  write_loss_csv((std::filesystem::path(common.out_dir) / "loss.csv").string(),
                 model.epoch_loss);

  RunRecord record("pretrain", seed);
  record.set_int("model", "bounce_points", field_config.num_bounce_points);
  record.set_int("model", "levels", field_config.encoding_levels);
  record.set_int("model", "width", field_config.hidden_width);
  record.set_int("model", "layers", field_config.hidden_layers);
  record.set_int("model", "rir_length", field_config.rir_length);
  record.set_int("model", "sample_rate", field_config.sample_rate);
  record.set_int("train", "epochs", recipe.epochs);
  record.set_int("train", "batch_size", recipe.batch_size);
  record.set_double("train", "step_size", recipe.step_size);
  record.set_int("train", "rooms", static_cast<long long>(rooms.size()));
  record.write(common.out_dir);

  std::cout << "pretrained on " << rooms.size() << " rooms (" << sample_count
            << " RIRs)\n";
  return 0;
}

/// Geometry for a named room: the room table first, then the ranking walk.
inline RoomContext resolve_room_context(const std::string& room_id,
                                        const Corpus& corpus,
                                        const std::string& ranking_path,
                                        const FieldConfig& field_config) {
  const RoomEntry* room = corpus.find_room(room_id);
  if (room) {
    try {
      return make_room_context(*room, corpus.room_table_path, field_config);
    } catch (const MissingGeometryError&) {
      if (ranking_path.empty()) throw;
    }
  } else if (ranking_path.empty()) {
    throw MissingGeometryError("room " + room_id +
                               " not in room table and no --ranking given");
  }
  const RoomRanking ranking = read_ranking_csv(ranking_path);
  const RetrievedGeometry geo = retrieve_geometry(ranking, corpus.rooms);
  RoomContext ctx = make_room_context(geo.room, corpus.room_table_path, field_config);
  ctx.room_id = room_id;  // keep the caller's room name, not the donor's
  return ctx;
}

inline int run_finetune(const CommonOpts& common, const FinetuneOpts& opts) {
  const TomlTable config = load_config(common.config_path);
  const std::uint64_t seed = resolve_seed(common.seed_given, common.seed, config);

  if (opts.method != "lora" && opts.method != "full")
    throw UsageError("--method must be lora or full");

  const Checkpoint base = load_checkpoint(opts.base_path);
  if (!base.params) throw InvalidInputError("checkpoint has no base parameters");
  const FieldConfig& field_config = base.config;

  TrainRecipe recipe = recipe_from(config, "finetune", seed);
  recipe.mode = opts.method == "lora" ? TrainRecipe::Mode::kFinetuneLora
                                      : TrainRecipe::Mode::kFinetuneFull;
  if (opts.rank > 0) recipe.lora_rank = opts.rank;
  recipe.check_valid();

  const Corpus corpus = load_corpus(opts.enrollment_path, opts.rooms_path);
  const auto enrollment_rows = corpus.room_rirs(opts.room_id);
  if (enrollment_rows.empty())
    throw InvalidInputError("no enrollment RIRs for room " + opts.room_id);

  if (common.dry_run) {
    std::cout << "plan: finetune (" << opts.method << ") room " << opts.room_id
              << " on " << enrollment_rows.size() << " RIRs, " << recipe.epochs
              << " epochs\n";
    return 0;
  }
  ensure_dir(common.out_dir);

  const RoomContext ctx =
      resolve_room_context(opts.room_id, corpus, opts.ranking_path, field_config);
  std::vector<TrainSample> enrollment;
  for (const RirManifestEntry* e : enrollment_rows) {
    const ImpulseResponse ir =
        read_wav(resolve_wav_path(opts.enrollment_path, e->wav_path));
    enrollment.push_back(make_sample(ctx, e->src, e->rcv, ir, field_config));
  }

  const FinetuneResult result =
      finetune(*base.params, field_config, enrollment, recipe);
  if (result.adapters) {
    save_checkpoint((std::filesystem::path(common.out_dir) / "adapters.nafc").string(),
                    field_config, nullptr, &*result.adapters);
  } else {
    save_checkpoint((std::filesystem::path(common.out_dir) / "model.nafc").string(),
                    field_config, &result.params, nullptr);
  }
  write_loss_csv((std::filesystem::path(common.out_dir) / "loss.csv").string(),
                 result.epoch_loss);

  RunRecord record("finetune", seed);
  record.set_string("finetune", "method", opts.method);
  record.set_string("finetune", "room", opts.room_id);
  record.set_int("finetune", "epochs", recipe.epochs);
  if (opts.method == "lora") record.set_int("finetune", "rank", recipe.lora_rank);
  record.write(common.out_dir);

  std::cout << "finetuned room " << opts.room_id << " (" << opts.method << ") on "
            << enrollment.size() << " RIRs\n";
  return 0;
}

inline int run_generate(const CommonOpts& common, const GenerateOpts& opts) {
  const TomlTable config = load_config(common.config_path);
  const std::uint64_t seed = resolve_seed(common.seed_given, common.seed, config);

  const Checkpoint base = load_checkpoint(opts.base_path);
  if (!base.params) throw InvalidInputError("checkpoint has no base parameters");
  const FieldConfig& field_config = base.config;

  std::optional<LoraAdapterSet> adapters;
  if (!opts.adapters_path.empty()) {
    const Checkpoint extra = load_checkpoint(opts.adapters_path);
    if (!extra.adapters) throw InvalidInputError("adapter file has no LoRA section");
    if (extra.config.hidden_width != field_config.hidden_width ||
        extra.config.hidden_layers != field_config.hidden_layers)
      throw ConfigError("adapter checkpoint does not match base architecture");
    adapters = extra.adapters;
  }

  const auto pairs = read_pair_manifest(opts.pairs_path);
  if (pairs.empty()) throw InvalidInputError("pairs manifest is empty");

  if (common.dry_run) {
    std::cout << "plan: generate " << pairs.size() << " RIRs for room "
              << opts.room_id << "\n";
    return 0;
  }
  ensure_dir(common.out_dir);
  ensure_dir((std::filesystem::path(common.out_dir) / "wav").string());

  Corpus corpus;
  corpus.room_table_path = opts.rooms_path;
  corpus.rooms = read_room_table(opts.rooms_path);
  const RoomContext ctx =
      resolve_room_context(opts.room_id, corpus, opts.ranking_path, field_config);

  std::vector<std::pair<Vec3, Vec3>> positions;
  for (const auto& p : pairs) positions.emplace_back(p.src, p.rcv);
  const std::vector<ImpulseResponse> rirs =
      infer(*base.params, adapters ? &*adapters : nullptr, positions, ctx, field_config);

  std::vector<RirManifestEntry> manifest;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::string rel = "wav/" + pairs[i].pair_id + ".wav";
    write_wav((std::filesystem::path(common.out_dir) / rel).string(), rirs[i]);
    RirManifestEntry entry;
    entry.rir_id = pairs[i].pair_id;
    entry.room_id = opts.room_id;
    entry.wav_path = rel;
    entry.src = pairs[i].src;
    entry.rcv = pairs[i].rcv;
    entry.sample_rate = field_config.sample_rate;
    manifest.push_back(std::move(entry));
  }
  write_jsonl((std::filesystem::path(common.out_dir) / "generated.jsonl").string(),
              manifest);

  RunRecord record("generate", seed);
  record.set_string("generate", "room", opts.room_id);
  record.set_int("generate", "pairs", static_cast<long long>(pairs.size()));
  record.write(common.out_dir);

  std::cout << "generated " << pairs.size() << " RIRs\n";
  return 0;
}

inline int run_evaluate(const CommonOpts& common, const EvaluateOpts& opts) {
  const TomlTable config = load_config(common.config_path);
  const std::uint64_t seed = resolve_seed(common.seed_given, common.seed, config);
  const FieldConfig field_config = field_config_from(config);

  EvalPlan plan;
  plan.target_room = opts.target_room;
  plan.enroll_count = opts.enroll > 0
                          ? opts.enroll
                          : static_cast<int>(config.get_int("eval", "enroll", 5));
  plan.retrieval_m =
      opts.m > 0 ? opts.m : static_cast<int>(config.get_int("eval", "m", 5));
  plan.room_limit = opts.limit > 0
                        ? opts.limit
                        : static_cast<int>(config.get_int("eval", "limit", 100));
  plan.seed = seed;

  TrainRecipe pretrain_recipe = recipe_from(config, "train", seed);
  pretrain_recipe.mode = TrainRecipe::Mode::kPretrain;
  TrainRecipe finetune_recipe = recipe_from(config, "finetune", seed);
  finetune_recipe.mode = TrainRecipe::Mode::kFinetuneLora;

  const Corpus corpus = load_corpus(opts.rirs_path, opts.rooms_path);
  std::vector<EvalCondition> conditions = default_conditions();
  if (opts.with_oracle) conditions.push_back({"oracle", "copy", 1, true});

  if (common.dry_run) {
    std::cout << "plan: evaluate " << conditions.size() << " conditions on room "
              << plan.target_room << " (" << plan.enroll_count << " enrollment RIRs)\n";
    return 0;
  }
  ensure_dir(common.out_dir);

  const ExperimentReport report = evaluate_conditions(
      corpus, plan, field_config, pretrain_recipe, finetune_recipe, conditions);
  write_report_csv(report,
                   (std::filesystem::path(common.out_dir) / "report.csv").string());

  RunRecord record("evaluate", seed);
  record.set_string("eval", "target_room", plan.target_room);
  record.set_int("eval", "enroll", plan.enroll_count);
  record.set_int("eval", "m", plan.retrieval_m);
  record.set_int("eval", "limit", plan.room_limit);
  record.write(common.out_dir);

  for (const auto& row : report.rows) {
    char line[256];
    std::snprintf(line, sizeof(line), "%s/%s rt60 %.3f edf %.3f drr %.3f\n",
                  row.pretraining_set.c_str(), row.finetune_method.c_str(),
                  row.rt60_err_pct, row.edf_err_db, row.drr_err_db);
    std::cout << line;
  }
  return 0;
}

}  // namespace detail

/// Entry point: parses argv, dispatches, maps failures to exit codes
/// (0 success, 1 pipeline error, 2 usage error).
inline int run(int argc, char** argv) {
  using namespace detail;
  CLI::App app{"room impulse response augmentation toolkit"};
  app.require_subcommand(1);

  CommonOpts common;
  SimulateOpts sim;
  AnalyzeOpts analyze;
  BuildIndexOpts build;
  RetrieveOpts retrieve;
  PretrainOpts pretrain_opts;
  FinetuneOpts finetune_opts;
  GenerateOpts generate;
  EvaluateOpts evaluate;

  // Option presence is read back after app.parse; per-subcommand callbacks
  // would overwrite each other.
  std::vector<CLI::Option*> seed_opts;
  auto add_common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("--config", common.config_path, "TOML config file");
    seed_opts.push_back(sub->add_option("--seed", common.seed, "override run seed"));
    sub->add_flag("--dry-run", common.dry_run, "print the plan, compute nothing");
    auto* out = sub->add_option("--out", common.out_dir, "output directory");
    if (needs_out) out->required();
  };

  CLI::App* s = app.add_subcommand("simulate", "generate a synthetic shoebox corpus");
  add_common(s, true);
  s->add_option("--rooms", sim.rooms, "room count");
  s->add_option("--pairs-per-room", sim.pairs, "RIRs per room");
  s->add_option("--target-room-pairs", sim.target_room_pairs,
                "pair count for the last room");
  s->add_option("--duration", sim.duration_s, "RIR length in seconds");
  s->add_option("--sample-rate", sim.sample_rate, "sample rate in Hz");
  auto* fd = s->add_flag("--frequency-dependent", sim.frequency_dependent,
                         "per-band wall absorption");

  CLI::App* a = app.add_subcommand("analyze", "RT60/DRR report for one RIR");
  add_common(a, false);
  a->add_option("--rir", analyze.rir_path, "WAV file to analyze")->required();
  a->add_option("--ref", analyze.ref_path, "reference WAV for metric errors");
  a->add_option("--bands", analyze.bands, "band centers or 'default'");

  CLI::App* b = app.add_subcommand("build-index", "fingerprint a corpus manifest");
  add_common(b, false);
  b->add_option("--rirs", build.rirs_path, "corpus rirs.jsonl")->required();
  b->add_option("--index-out", build.index_out, "output .rtix path")->required();
  b->add_option("--bands", build.bands, "band centers or 'default'");

  CLI::App* r = app.add_subcommand("retrieve", "rank rooms for an enrollment set");
  add_common(r, true);
  r->add_option("--enrollment", retrieve.enrollment_path, "enrollment rirs.jsonl");
  r->add_option("--index", retrieve.index_path, "index .rtix path")->required();
  r->add_option("-M,--nearest", retrieve.m, "nearest RIRs per enrollment RIR");
  r->add_option("--limit", retrieve.limit, "room cap for the pre-training set");
  r->add_flag("--random", retrieve.random, "random room selection baseline");
  r->add_option("--count", retrieve.count, "random room count (default --limit)");
  r->add_option("--bands", retrieve.bands, "band centers or 'default'");

  CLI::App* p = app.add_subcommand("pretrain", "pre-train the field on a room set");
  add_common(p, true);
  p->add_option("--rirs", pretrain_opts.rirs_path, "corpus rirs.jsonl")->required();
  p->add_option("--rooms", pretrain_opts.rooms_path, "corpus rooms.jsonl")->required();
  p->add_option("--room-list", pretrain_opts.room_list_path,
                "selected_rooms.txt (default: all rooms)");

  CLI::App* f = app.add_subcommand("finetune", "adapt a checkpoint to one room");
  add_common(f, true);
  f->add_option("--base", finetune_opts.base_path, "base .nafc checkpoint")->required();
  f->add_option("--enrollment", finetune_opts.enrollment_path, "enrollment rirs.jsonl")
      ->required();
  f->add_option("--rooms", finetune_opts.rooms_path, "room table rooms.jsonl")
      ->required();
  f->add_option("--room", finetune_opts.room_id, "target room id")->required();
  f->add_option("--method", finetune_opts.method, "lora or full");
  f->add_option("--rank", finetune_opts.rank, "LoRA rank");
  f->add_option("--ranking", finetune_opts.ranking_path,
                "ranking.csv for retrieved geometry");

  CLI::App* g = app.add_subcommand("generate", "synthesize RIRs at requested pairs");
  add_common(g, true);
  g->add_option("--base", generate.base_path, "base .nafc checkpoint")->required();
  g->add_option("--adapters", generate.adapters_path, "adapter-only .nafc");
  g->add_option("--pairs", generate.pairs_path, "pairs.jsonl")->required();
  g->add_option("--rooms", generate.rooms_path, "room table rooms.jsonl")->required();
  g->add_option("--room", generate.room_id, "target room id")->required();
  g->add_option("--ranking", generate.ranking_path,
                "ranking.csv for retrieved geometry");

  CLI::App* e = app.add_subcommand("evaluate", "table-style condition comparison");
  add_common(e, true);
  e->add_option("--rirs", evaluate.rirs_path, "corpus rirs.jsonl")->required();
  e->add_option("--rooms", evaluate.rooms_path, "corpus rooms.jsonl")->required();
  e->add_option("--target-room", evaluate.target_room, "held-out room id")->required();
  e->add_option("--enroll", evaluate.enroll, "enrollment RIR count");
  e->add_option("-M,--nearest", evaluate.m, "nearest RIRs per enrollment RIR");
  e->add_option("--limit", evaluate.limit, "room cap for the pre-training set");
  e->add_flag("--with-oracle", evaluate.with_oracle,
              "append a copy-ground-truth debug row");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& help) {
    return app.exit(help);
  } catch (const CLI::ParseError& err) {
    std::cerr << "afk: usage error: " << err.what() << "\n";
    return 2;
  }

  for (const CLI::Option* opt : seed_opts)
    common.seed_given = common.seed_given || opt->count() > 0;
  sim.frequency_dependent_given = fd->count() > 0;

  try {
    if (app.got_subcommand(s)) return run_simulate(common, sim);
    if (app.got_subcommand(a)) return run_analyze(common, analyze);
    if (app.got_subcommand(b)) return run_build_index(common, build);
    if (app.got_subcommand(r)) return run_retrieve(common, retrieve);
    if (app.got_subcommand(p)) return run_pretrain(common, pretrain_opts);
    if (app.got_subcommand(f)) return run_finetune(common, finetune_opts);
    if (app.got_subcommand(g)) return run_generate(common, generate);
    if (app.got_subcommand(e)) return run_evaluate(common, evaluate);
  } catch (const UsageError& err) {
    std::cerr << "afk: usage error: " << err.what() << "\n";
    return 2;
  } catch (const Error& err) {
    std::cerr << "afk: error: " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "afk: error: " << err.what() << "\n";
    return 1;
  }
  std::cerr << "afk: usage error: missing subcommand\n";
  return 2;
}

}  // namespace afk::cli

#endif  // AFK_CLI_HPP_

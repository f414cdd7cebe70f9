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

#ifndef AFK_TRAINING_HPP_
#define AFK_TRAINING_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "afk/checkpoint.hpp"
#include "afk/error.hpp"
#include "afk/field.hpp"
#include "afk/geometry.hpp"
#include "afk/manifest.hpp"
#include "afk/metrics.hpp"
#include "afk/random.hpp"
#include "afk/retrieval.hpp"
#include "afk/rir.hpp"
#include "afk/stft.hpp"
#include "afk/wav.hpp"

namespace afk {

struct TrainRecipe {
  enum class Mode { kPretrain, kFinetuneLora, kFinetuneFull };

  Mode mode = Mode::kPretrain;
  int epochs = 100;
  int batch_size = 8;
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::uint64_t seed = 0;
  int lora_rank = 1;  // finetune_lora only

  void check_valid() const {
    if (epochs < 0 || batch_size < 1 || !(step_size > 0.0))
      throw ConfigError("recipe: epochs >= 0, batch_size >= 1, step_size > 0");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
      throw ConfigError("recipe: moment smoothing must lie in (0, 1)");
    if (mode == Mode::kFinetuneLora && lora_rank < 1)
      throw ConfigError("recipe: lora rank must be >= 1");
  }
};

/// Adaptive-moment gradient descent over an ordered list of tensors.
class Adam {
 public:
  Adam(double lr, double beta1, double beta2)
      : lr_(lr), beta1_(beta1), beta2_(beta2) {}

  void step(const std::vector<std::vector<double>*>& params,
            const std::vector<const std::vector<double>*>& grads) {
    if (params.size() != grads.size())
      throw ShapeError("adam: tensor/gradient count mismatch");
    if (m_.empty()) {
      for (const auto* p : params) {
        m_.emplace_back(p->size(), 0.0);
        v_.emplace_back(p->size(), 0.0);
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      std::vector<double>& p = *params[i];
      const std::vector<double>& g = *grads[i];
      if (p.size() != g.size() || p.size() != m_[i].size())
        throw ShapeError("adam: tensor shape changed between steps");
      for (std::size_t j = 0; j < p.size(); ++j) {
        m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g[j];
        v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g[j] * g[j];
        const double mhat = m_[i][j] / c1;
        const double vhat = v_[i][j] / c2;
        p[j] -= lr_ * mhat / (std::sqrt(vhat) + kEps);
      }
    }
  }

 private:
  static constexpr double kEps = 1e-8;
  double lr_, beta1_, beta2_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

/// A corpus on disk: two JSONL manifests plus the WAVs they point at.
struct Corpus {
  std::string rir_manifest_path;
  std::string room_table_path;
  std::vector<RirManifestEntry> rirs;
  std::vector<RoomEntry> rooms;

  const RoomEntry* find_room(const std::string& room_id) const {
    for (const auto& r : rooms)
      if (r.room_id == room_id) return &r;
    return nullptr;
  }

  std::vector<const RirManifestEntry*> room_rirs(const std::string& room_id) const {
    std::vector<const RirManifestEntry*> out;
    for (const auto& e : rirs)
      if (e.room_id == room_id) out.push_back(&e);
    return out;
  }
};

inline Corpus load_corpus(const std::string& rir_manifest_path,
                          const std::string& room_table_path) {
  Corpus c;
  c.rir_manifest_path = rir_manifest_path;
  c.room_table_path = room_table_path;
  c.rirs = read_rir_manifest(rir_manifest_path);
  c.rooms = read_room_table(room_table_path);
  return c;
}

/// Geometry context reused across every sample of one room. Bounce points
/// are seeded by the room id alone, so they are a property of the room, not
/// of the training run.
struct RoomContext {
  std::string room_id;
  BoundingBox bbox;
  BouncePointSet bounce;
};

inline TriangleMesh room_mesh(const RoomEntry& room, const std::string& table_path) {
  if (room.mesh_path)
    return load_obj(resolve_wav_path(table_path, *room.mesh_path));
  const Vec3 ext = room.bbox.extent();
  if (ext.x > 0.0 && ext.y > 0.0 && ext.z > 0.0) return box_mesh(room.bbox);
  throw MissingGeometryError("room " + room.room_id + " has neither mesh nor box");
}

inline RoomContext make_room_context(const RoomEntry& room,
                                     const std::string& table_path,
                                     const FieldConfig& config) {
  const TriangleMesh mesh = room_mesh(room, table_path);
  RoomContext ctx;
  ctx.room_id = room.room_id;
  ctx.bbox = bounding_box(mesh);
  ctx.bounce = poisson_disk_sample(mesh, config.num_bounce_points,
                                   fnv1a64(room.room_id), room.room_id);
  return ctx;
}

/// Target grid from a ground-truth RIR: rate must match, length is cropped
/// or zero-padded to the configured RIR length.
inline SpectrogramTarget rir_target(const ImpulseResponse& ir, const FieldConfig& config) {
  if (ir.sample_rate != config.sample_rate)
    throw RateMismatchError("rir rate " + std::to_string(ir.sample_rate) +
                            " does not match configured " +
                            std::to_string(config.sample_rate));
  ImpulseResponse fixed;
  fixed.sample_rate = ir.sample_rate;
  fixed.samples = ir.samples;
  fixed.samples.resize(config.rir_length, 0.0);
  return stft_log_magnitude(fixed, config.stft);
}

inline TrainSample make_sample(const RoomContext& ctx, const Vec3& src, const Vec3& rcv,
                               const ImpulseResponse& ir, const FieldConfig& config) {
  TrainSample s;
  s.input = make_field_input(src, rcv, ctx.bounce, ctx.bbox, config);
  s.target = rir_target(ir, config);
  return s;
}

namespace training_detail {

inline std::vector<std::vector<double>*> trainable_base(ModelParams& p) {
  std::vector<std::vector<double>*> out;
  for (Dense& l : p.layers) {
    out.push_back(&l.w.data);
    out.push_back(&l.b);
  }
  return out;
}

inline std::vector<const std::vector<double>*> base_grads(const GradientSet& g) {
  std::vector<const std::vector<double>*> out;
  for (const Dense& l : g.base) {
    out.push_back(&l.w.data);
    out.push_back(&l.b);
  }
  return out;
}

inline std::vector<std::vector<double>*> trainable_lora(LoraAdapterSet& s) {
  std::vector<std::vector<double>*> out;
  for (Matrix& m : s.a) out.push_back(&m.data);
  for (Matrix& m : s.b) out.push_back(&m.data);
  return out;
}

inline std::vector<const std::vector<double>*> lora_grads(const GradientSet& g) {
  std::vector<const std::vector<double>*> out;
  for (const Matrix& m : g.lora_a) out.push_back(&m.data);
  for (const Matrix& m : g.lora_b) out.push_back(&m.data);
  return out;
}

/// One optimization run over a fixed sample list; epoch order reshuffled
/// from the run seed. Trains either the base or the adapters.
inline std::vector<double> optimize(ModelParams& params, LoraAdapterSet* adapters,
                                    const FieldConfig& config,
                                    const std::vector<TrainSample>& samples,
                                    const TrainRecipe& recipe) {
  Adam adam(recipe.step_size, recipe.beta1, recipe.beta2);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> epoch_loss;
  epoch_loss.reserve(recipe.epochs);
  for (int epoch = 0; epoch < recipe.epochs; ++epoch) {
    Rng rng(mix_seed(recipe.seed, static_cast<std::uint64_t>(epoch) + 1));
    rng.shuffle(order);
    double sum = 0.0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(recipe.batch_size)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(recipe.batch_size));
      std::vector<TrainSample> batch;
      batch.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) batch.push_back(samples[order[i]]);
      const GradientSet g = gradients(params, config, batch, adapters);
      sum += g.loss * static_cast<double>(batch.size());
      if (adapters) {
        adam.step(trainable_lora(*adapters), lora_grads(g));
      } else {
        adam.step(trainable_base(params), base_grads(g));
      }
    }
    const double mean = sum / static_cast<double>(samples.size());
    if (!std::isfinite(mean))
      throw NumericalError("epoch " + std::to_string(epoch) + " loss is not finite");
    epoch_loss.push_back(mean);
  }
  return epoch_loss;
}

}  // namespace training_detail

struct TrainedModel {
  ModelParams params;
  std::vector<double> epoch_loss;
};

/// Pre-training over a room set: every (room, RIR) pair of the selected
/// rooms forms the sample pool, shuffled per epoch.
inline TrainedModel pretrain(const std::vector<std::string>& room_ids,
                             const Corpus& corpus, const FieldConfig& config,
                             const TrainRecipe& recipe) {
  config.check_valid();
  recipe.check_valid();
  if (room_ids.empty()) throw InvalidInputError("pretrain: no rooms selected");

  std::vector<TrainSample> samples;
  for (const std::string& room_id : room_ids) {
    const RoomEntry* room = corpus.find_room(room_id);
    if (!room) throw MissingGeometryError("room " + room_id + " not in room table");
    const RoomContext ctx = make_room_context(*room, corpus.room_table_path, config);
    const auto rirs = corpus.room_rirs(room_id);
    if (rirs.empty())
      throw InvalidInputError("pretrain: room " + room_id + " has no RIRs");
    for (const RirManifestEntry* e : rirs) {
      const ImpulseResponse ir =
          read_wav(resolve_wav_path(corpus.rir_manifest_path, e->wav_path));
      samples.push_back(make_sample(ctx, e->src, e->rcv, ir, config));
    }
  }

  TrainedModel model;
  model.params = init_params(config, recipe.seed);
  model.epoch_loss =
      training_detail::optimize(model.params, nullptr, config, samples, recipe);
  return model;
}

struct FinetuneResult {
  ModelParams params;
  std::optional<LoraAdapterSet> adapters;
  std::vector<double> epoch_loss;
};

/// LoRA mode freezes the base and returns adapters; full mode updates a
/// copy of the base. Zero epochs return the starting point unchanged.
inline FinetuneResult finetune(const ModelParams& base, const FieldConfig& config,
                               const std::vector<TrainSample>& enrollment,
                               const TrainRecipe& recipe) {
  config.check_valid();
  recipe.check_valid();
  if (enrollment.empty()) throw InvalidInputError("finetune: empty enrollment set");
  if (recipe.mode == TrainRecipe::Mode::kPretrain)
    throw ConfigError("finetune: recipe mode must be a finetune mode");

  FinetuneResult result;
  result.params = base;
  if (recipe.mode == TrainRecipe::Mode::kFinetuneLora) {
    LoraAdapterSet adapters = lora_init(base, recipe.lora_rank, recipe.seed);
    result.epoch_loss = training_detail::optimize(result.params, &adapters, config,
                                                  enrollment, recipe);
    result.adapters = std::move(adapters);
  } else {
    result.epoch_loss = training_detail::optimize(result.params, nullptr, config,
                                                  enrollment, recipe);
  }
  return result;
}

/// One synthesized RIR per (src, rcv) pair.
inline std::vector<ImpulseResponse> infer(const ModelParams& params,
                                          const LoraAdapterSet* adapters,
                                          const std::vector<std::pair<Vec3, Vec3>>& pairs,
                                          const RoomContext& ctx,
                                          const FieldConfig& config,
                                          int griffin_lim_iterations = 32) {
  std::vector<ImpulseResponse> out;
  out.reserve(pairs.size());
  for (const auto& [src, rcv] : pairs) {
    const FieldInput input = make_field_input(src, rcv, ctx.bounce, ctx.bbox, config);
    const SpectrogramTarget spec = forward(params, config, input, adapters);
    out.push_back(synthesize_waveform(spec, config.sample_rate, griffin_lim_iterations,
                                      static_cast<std::size_t>(config.rir_length),
                                      config.stft));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Condition evaluation
// ---------------------------------------------------------------------------

struct EvalCondition {
  std::string pretraining_set;   // "retrieved" | "random" | "none"
  std::string finetune_method;   // "lora-1" style or "all"
  int lora_rank = 1;
  bool oracle_copy = false;  // debug: prediction := ground truth
};

inline std::vector<EvalCondition> default_conditions() {
  return {{"retrieved", "lora-1", 1, false},
          {"retrieved", "all", 1, false},
          {"random", "lora-1", 1, false},
          {"random", "all", 1, false},
          {"none", "all", 1, false}};
}

struct ExperimentReport {
  struct Row {
    std::string pretraining_set;
    std::string finetune_method;
    double rt60_err_pct = 0.0;
    double edf_err_db = 0.0;
    double drr_err_db = 0.0;
  };
  std::vector<Row> rows;
};

/// How one evaluation run is split and seeded.
struct EvalPlan {
  std::string target_room;
  int enroll_count = 5;      // first pairs of the target room enroll, rest evaluate
  int retrieval_m = 5;       // M nearest per enrollment RIR
  int room_limit = 100;      // pre-training set truncation
  std::uint64_t seed = 0;    // master seed
  BandSpec bands = BandSpec::standard();
};

namespace training_detail {

struct LabeledRir {
  const RirManifestEntry* entry;
  ImpulseResponse ir;
};

inline std::vector<LabeledRir> load_room_rirs(const Corpus& corpus,
                                              const std::string& room_id) {
  std::vector<LabeledRir> out;
  for (const RirManifestEntry* e : corpus.room_rirs(room_id)) {
    out.push_back({e, read_wav(resolve_wav_path(corpus.rir_manifest_path, e->wav_path))});
  }
  return out;
}

}  // namespace training_detail

/// Runs the pipeline once per condition against one held-out room and
/// reports mean metric errors over the room's evaluation positions.
/// Conditions share the retrieval index, the enrollment/evaluation split,
/// and per-condition seeds derived from the master seed.
inline ExperimentReport evaluate_conditions(const Corpus& corpus, const EvalPlan& plan,
                                            const FieldConfig& config,
                                            const TrainRecipe& pretrain_recipe,
                                            const TrainRecipe& finetune_recipe,
                                            const std::vector<EvalCondition>& conditions) {
  config.check_valid();
  const RoomEntry* target = corpus.find_room(plan.target_room);
  if (!target) throw MissingGeometryError("target room not in room table");

  auto target_rirs = training_detail::load_room_rirs(corpus, plan.target_room);
  if (static_cast<int>(target_rirs.size()) <= plan.enroll_count)
    throw InvalidInputError("target room needs held-out RIRs beyond enrollment");

  // Index over every other room.
  std::vector<RirManifestEntry> others;
  for (const auto& e : corpus.rirs)
    if (e.room_id != plan.target_room) others.push_back(e);
  const RetrievalIndex index = build_index(others, corpus.rir_manifest_path, plan.bands);

  std::vector<Rt60Fingerprint> enrollment_fp;
  for (int i = 0; i < plan.enroll_count; ++i)
    enrollment_fp.push_back(multiband_rt60(target_rirs[i].ir, plan.bands));
  const RoomRanking ranking = rank_rooms(index, enrollment_fp, plan.retrieval_m);
  const std::vector<std::string> retrieved =
      select_pretraining_rooms(ranking, plan.room_limit);
  const std::vector<std::string> random_rooms = select_random_rooms(
      index, static_cast<int>(retrieved.size()), mix_seed(plan.seed, fnv1a64("random-set")));

  const RoomContext target_ctx =
      make_room_context(*target, corpus.room_table_path, config);
  std::vector<TrainSample> enrollment;
  for (int i = 0; i < plan.enroll_count; ++i) {
    const auto& r = target_rirs[i];
    enrollment.push_back(
        make_sample(target_ctx, r.entry->src, r.entry->rcv, r.ir, config));
  }
  std::vector<std::pair<Vec3, Vec3>> eval_pairs;
  for (std::size_t i = plan.enroll_count; i < target_rirs.size(); ++i)
    eval_pairs.emplace_back(target_rirs[i].entry->src, target_rirs[i].entry->rcv);

  ExperimentReport report;
  for (const EvalCondition& cond : conditions) {
    const std::uint64_t cond_seed =
        mix_seed(plan.seed, fnv1a64(cond.pretraining_set + "/" + cond.finetune_method));

    ExperimentReport::Row row;
    row.pretraining_set = cond.pretraining_set;
    row.finetune_method = cond.finetune_method;

    std::vector<ImpulseResponse> predicted;
    if (cond.oracle_copy) {
      for (std::size_t i = plan.enroll_count; i < target_rirs.size(); ++i)
        predicted.push_back(target_rirs[i].ir);
    } else {
      ModelParams base;
      if (cond.pretraining_set == "retrieved" || cond.pretraining_set == "random") {
        const auto& rooms =
            cond.pretraining_set == "retrieved" ? retrieved : random_rooms;
        TrainRecipe recipe = pretrain_recipe;
        recipe.mode = TrainRecipe::Mode::kPretrain;
        recipe.seed = cond_seed;
        base = pretrain(rooms, corpus, config, recipe).params;
      } else if (cond.pretraining_set == "none") {
        base = init_params(config, cond_seed);
      } else {
        throw ConfigError("unknown pretraining set: " + cond.pretraining_set);
      }

      TrainRecipe recipe = finetune_recipe;
      recipe.mode = cond.finetune_method == "all"
                        ? TrainRecipe::Mode::kFinetuneFull
                        : TrainRecipe::Mode::kFinetuneLora;
      recipe.lora_rank = cond.lora_rank;
      recipe.seed = mix_seed(cond_seed, fnv1a64("finetune"));
      const FinetuneResult tuned = finetune(base, config, enrollment, recipe);
      predicted = infer(tuned.params,
                        tuned.adapters ? &*tuned.adapters : nullptr, eval_pairs,
                        target_ctx, config);
    }

    double rt60 = 0.0, edf = 0.0, drr_e = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      ImpulseResponse ref = target_rirs[plan.enroll_count + i].ir;
      ref.samples.resize(config.rir_length, 0.0);
      const MetricErrors err = metric_errors(predicted[i], ref, plan.bands);
      rt60 += err.rt60_err_pct;
      edf += err.edf_err_db;
      drr_e += err.drr_err_db;
    }
    const double n = static_cast<double>(predicted.size());
    row.rt60_err_pct = rt60 / n;
    row.edf_err_db = edf / n;
    row.drr_err_db = drr_e / n;
    report.rows.push_back(std::move(row));
  }
  return report;
}

/// Table-style CSV; fixed formatting keeps reruns byte-identical.
inline void write_report_csv(const ExperimentReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report: " + path);
  out << "pretraining_set,finetune_method,rt60_err_pct,edf_err_db,drr_err_db\n";
  char line[256];
  for (const auto& row : report.rows) {
    std::snprintf(line, sizeof(line), "%s,%s,%.6f,%.6f,%.6f\n",
                  row.pretraining_set.c_str(), row.finetune_method.c_str(),
                  row.rt60_err_pct, row.edf_err_db, row.drr_err_db);
    out << line;
  }
}

/// Per-pair metric rows for analysis output.
struct PairMetricsRow {
  std::string room_id;
  std::string pair_id;
  MetricErrors errors;
};

inline void write_pair_metrics_csv(const std::vector<PairMetricsRow>& rows,
                                   const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write metrics csv: " + path);
  out << "room_id,pair_id,rt60_err_pct,edf_err_db,drr_err_db\n";
  char line[256];
  for (const auto& row : rows) {
    std::snprintf(line, sizeof(line), "%s,%s,%.6f,%.6f,%.6f\n", row.room_id.c_str(),
                  row.pair_id.c_str(), row.errors.rt60_err_pct, row.errors.edf_err_db,
                  row.errors.drr_err_db);
    out << line;
  }
}

}  // namespace afk

#endif  // AFK_TRAINING_HPP_

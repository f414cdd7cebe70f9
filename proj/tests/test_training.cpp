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

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "afk/simulator.hpp"
#include "afk/training.hpp"

namespace {

using afk::Corpus;
using afk::CorpusRecipe;
using afk::EvalCondition;
using afk::EvalPlan;
using afk::FieldConfig;
using afk::ImpulseResponse;
using afk::LoraAdapterSet;
using afk::ModelParams;
using afk::RirManifestEntry;
using afk::Rng;
using afk::RoomEntry;
using afk::TrainRecipe;
using afk::TrainSample;
using afk::Vec3;

namespace fs = std::filesystem;

FieldConfig tiny_config() {
  FieldConfig c;
  c.num_bounce_points = 4;
  c.encoding_levels = 2;
  c.hidden_width = 16;
  c.hidden_layers = 2;
  c.stft.window = 16;
  c.stft.hop = 8;
  c.stft.fft = 16;
  c.rir_length = 64;
  c.sample_rate = 16000;
  return c;
}

std::string temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("afk_training_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir / "wav");
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ImpulseResponse decaying_noise(double tau, std::size_t length, std::uint64_t seed) {
  ImpulseResponse ir;
  ir.sample_rate = 16000;
  Rng rng(seed);
  for (std::size_t i = 0; i < length; ++i) {
    const double t = static_cast<double>(i) / 16000.0;
    ir.samples.push_back(std::exp(-t / tau) * rng.uniform(-1.0, 1.0));
  }
  return ir;
}

/// One populated room plus one empty one; RIRs are short noise bursts, which
/// is all the optimizer tests need.
Corpus micro_corpus(const std::string& dir, int num_rirs, std::uint64_t seed) {
  RoomEntry room;
  room.room_id = "roomA";
  room.bbox = {{0.0, 0.0, 0.0}, {3.0, 2.5, 2.2}};
  room.dims = Vec3{3.0, 2.5, 2.2};
  RoomEntry bare;
  bare.room_id = "roomEmpty";
  bare.bbox = {{0.0, 0.0, 0.0}, {2.0, 2.0, 2.0}};

  std::vector<RirManifestEntry> rirs;
  Rng rng(seed);
  auto place = [&] {
    return Vec3{rng.uniform(0.4, 2.6), rng.uniform(0.4, 2.1), rng.uniform(0.4, 1.8)};
  };
  for (int i = 0; i < num_rirs; ++i) {
    RirManifestEntry e;
    e.rir_id = "roomA_p" + std::to_string(i);
    e.room_id = "roomA";
    e.wav_path = "wav/" + e.rir_id + ".wav";
    e.src = place();
    e.rcv = place();
    e.sample_rate = 16000;
    afk::write_wav(dir + "/" + e.wav_path,
                   decaying_noise(0.01, 64, seed + 77 + static_cast<std::uint64_t>(i)));
    rirs.push_back(e);
  }
  afk::write_jsonl(dir + "/rirs.jsonl", rirs);
  afk::write_jsonl(dir + "/rooms.jsonl", std::vector<RoomEntry>{room, bare});
  return afk::load_corpus(dir + "/rirs.jsonl", dir + "/rooms.jsonl");
}

void expect_params_equal(const ModelParams& a, const ModelParams& b) {
  ASSERT_EQ(a.layers.size(), b.layers.size());
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    ASSERT_EQ(a.layers[l].w.data.size(), b.layers[l].w.data.size());
    for (std::size_t i = 0; i < a.layers[l].w.data.size(); ++i)
      ASSERT_EQ(a.layers[l].w.data[i], b.layers[l].w.data[i]);
    ASSERT_EQ(a.layers[l].b.size(), b.layers[l].b.size());
    for (std::size_t i = 0; i < a.layers[l].b.size(); ++i)
      ASSERT_EQ(a.layers[l].b[i], b.layers[l].b[i]);
  }
}

double samples_loss(const ModelParams& params, const FieldConfig& config,
                    const std::vector<TrainSample>& samples,
                    const LoraAdapterSet* adapters = nullptr) {
  double total = 0.0;
  for (const auto& s : samples)
    total += afk::loss(afk::forward(params, config, s.input, adapters), s.target);
  return total / static_cast<double>(samples.size());
}

std::vector<TrainSample> room_samples(const Corpus& corpus, const FieldConfig& config) {
  const RoomEntry* room = corpus.find_room("roomA");
  const auto ctx = afk::make_room_context(*room, corpus.room_table_path, config);
  std::vector<TrainSample> out;
  for (const RirManifestEntry* e : corpus.room_rirs("roomA")) {
    const ImpulseResponse ir =
        afk::read_wav(afk::resolve_wav_path(corpus.rir_manifest_path, e->wav_path));
    out.push_back(afk::make_sample(ctx, e->src, e->rcv, ir, config));
  }
  return out;
}

// ==== Optimizer =============================================================

TEST(Adam, FirstStepMovesByTheLearningRate) {
  std::vector<double> x{5.0};
  const std::vector<double> g{10.0};
  afk::Adam adam(1e-3, 0.9, 0.999);
  adam.step({&x}, {&g});
  EXPECT_NEAR(x[0], 5.0 - 1e-3, 1e-9);
}

TEST(Adam, MinimizesAQuadratic) {
  std::vector<double> x{5.0};
  afk::Adam adam(0.01, 0.9, 0.999);
  for (int i = 0; i < 2000; ++i) {
    const std::vector<double> g{2.0 * (x[0] - 3.0)};
    adam.step({&x}, {&g});
  }
  EXPECT_NEAR(x[0], 3.0, 0.05);
}

TEST(Adam, ShapeMismatchesRejected) {
  std::vector<double> x{1.0, 2.0};
  const std::vector<double> g{0.5};
  afk::Adam adam(1e-3, 0.9, 0.999);
  EXPECT_THROW(adam.step({&x}, {&g, &g}), afk::ShapeError);
  EXPECT_THROW(adam.step({&x}, {&g}), afk::ShapeError);
}

TEST(Recipe, ValidationCatchesBadValues) {
  TrainRecipe r;
  EXPECT_NO_THROW(r.check_valid());
  r.epochs = -1;
  EXPECT_THROW(r.check_valid(), afk::ConfigError);
  r = TrainRecipe{};
  r.batch_size = 0;
  EXPECT_THROW(r.check_valid(), afk::ConfigError);
  r = TrainRecipe{};
  r.step_size = 0.0;
  EXPECT_THROW(r.check_valid(), afk::ConfigError);
  r = TrainRecipe{};
  r.beta1 = 1.0;
  EXPECT_THROW(r.check_valid(), afk::ConfigError);
  r = TrainRecipe{};
  r.mode = TrainRecipe::Mode::kFinetuneLora;
  r.lora_rank = 0;
  EXPECT_THROW(r.check_valid(), afk::ConfigError);
}

// ==== Pre-training ==========================================================

TEST(Pretrain, MemorizesAMicroCorpus) {
  const std::string dir = temp_dir("memorize");
  const Corpus corpus = micro_corpus(dir, 2, 11);
  const FieldConfig config = tiny_config();
  TrainRecipe recipe;
  recipe.epochs = 300;
  recipe.batch_size = 2;
  recipe.step_size = 1e-2;
  recipe.seed = 5;
  const auto model = afk::pretrain({"roomA"}, corpus, config, recipe);
  ASSERT_EQ(model.epoch_loss.size(), 300u);
  EXPECT_GT(model.epoch_loss.front(), 0.0);
  EXPECT_LT(model.epoch_loss.back(), 0.2 * model.epoch_loss.front());
}

TEST(Pretrain, ZeroEpochsReturnsTheSeededInit) {
  const std::string dir = temp_dir("zeroepoch");
  const Corpus corpus = micro_corpus(dir, 1, 3);
  const FieldConfig config = tiny_config();
  TrainRecipe recipe;
  recipe.epochs = 0;
  recipe.seed = 21;
  const auto model = afk::pretrain({"roomA"}, corpus, config, recipe);
  EXPECT_TRUE(model.epoch_loss.empty());
  expect_params_equal(model.params, afk::init_params(config, 21));
}

TEST(Pretrain, SameSeedSameWeights) {
  const std::string dir = temp_dir("detpretrain");
  const Corpus corpus = micro_corpus(dir, 3, 9);
  const FieldConfig config = tiny_config();
  TrainRecipe recipe;
  recipe.epochs = 3;
  recipe.batch_size = 2;
  recipe.seed = 4;
  const auto a = afk::pretrain({"roomA"}, corpus, config, recipe);
  const auto b = afk::pretrain({"roomA"}, corpus, config, recipe);
  expect_params_equal(a.params, b.params);
  ASSERT_EQ(a.epoch_loss.size(), b.epoch_loss.size());
  for (std::size_t i = 0; i < a.epoch_loss.size(); ++i)
    EXPECT_EQ(a.epoch_loss[i], b.epoch_loss[i]);
}

TEST(Pretrain, BadSelectionsRejected) {
  const std::string dir = temp_dir("badselect");
  const Corpus corpus = micro_corpus(dir, 1, 2);
  const FieldConfig config = tiny_config();
  const TrainRecipe recipe;
  EXPECT_THROW(afk::pretrain({}, corpus, config, recipe), afk::InvalidInputError);
  EXPECT_THROW(afk::pretrain({"ghost"}, corpus, config, recipe),
               afk::MissingGeometryError);
  EXPECT_THROW(afk::pretrain({"roomEmpty"}, corpus, config, recipe),
               afk::InvalidInputError);
}

// ==== Fine-tuning ===========================================================

TEST(Finetune, ZeroEpochLoraIsIdentity) {
  const std::string dir = temp_dir("loraid");
  const Corpus corpus = micro_corpus(dir, 2, 13);
  const FieldConfig config = tiny_config();
  const auto enrollment = room_samples(corpus, config);
  const auto base = afk::init_params(config, 1);

  TrainRecipe recipe;
  recipe.mode = TrainRecipe::Mode::kFinetuneLora;
  recipe.epochs = 0;
  recipe.lora_rank = 2;
  const auto result = afk::finetune(base, config, enrollment, recipe);
  EXPECT_TRUE(result.epoch_loss.empty());
  expect_params_equal(result.params, base);
  ASSERT_TRUE(result.adapters.has_value());
  EXPECT_EQ(result.adapters->rank, 2);
  for (const auto& m : result.adapters->b)
    for (double v : m.data) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Finetune, ZeroEpochFullKeepsBase) {
  const std::string dir = temp_dir("fullid");
  const Corpus corpus = micro_corpus(dir, 1, 14);
  const FieldConfig config = tiny_config();
  const auto enrollment = room_samples(corpus, config);
  const auto base = afk::init_params(config, 2);

  TrainRecipe recipe;
  recipe.mode = TrainRecipe::Mode::kFinetuneFull;
  recipe.epochs = 0;
  const auto result = afk::finetune(base, config, enrollment, recipe);
  EXPECT_FALSE(result.adapters.has_value());
  expect_params_equal(result.params, base);
}

TEST(Finetune, LoraDescendsWithFrozenBase) {
  const std::string dir = temp_dir("loradown");
  const Corpus corpus = micro_corpus(dir, 2, 15);
  const FieldConfig config = tiny_config();
  const auto enrollment = room_samples(corpus, config);
  const auto base = afk::init_params(config, 3);
  const double before = samples_loss(base, config, enrollment);

  TrainRecipe recipe;
  recipe.mode = TrainRecipe::Mode::kFinetuneLora;
  recipe.epochs = 30;
  recipe.batch_size = 2;
  recipe.step_size = 1e-2;
  recipe.lora_rank = 2;
  const auto result = afk::finetune(base, config, enrollment, recipe);
  expect_params_equal(result.params, base);  // only adapters moved
  ASSERT_TRUE(result.adapters.has_value());
  EXPECT_LT(samples_loss(result.params, config, enrollment, &*result.adapters),
            before);
}

TEST(Finetune, FullModeDescends) {
  const std::string dir = temp_dir("fulldown");
  const Corpus corpus = micro_corpus(dir, 2, 16);
  const FieldConfig config = tiny_config();
  const auto enrollment = room_samples(corpus, config);
  const auto base = afk::init_params(config, 4);
  const double before = samples_loss(base, config, enrollment);

  TrainRecipe recipe;
  recipe.mode = TrainRecipe::Mode::kFinetuneFull;
  recipe.epochs = 30;
  recipe.batch_size = 2;
  recipe.step_size = 1e-2;
  const auto result = afk::finetune(base, config, enrollment, recipe);
  EXPECT_LT(samples_loss(result.params, config, enrollment), before);
}

TEST(Finetune, BadRequestsRejected) {
  const std::string dir = temp_dir("badfinetune");
  const Corpus corpus = micro_corpus(dir, 1, 17);
  const FieldConfig config = tiny_config();
  const auto enrollment = room_samples(corpus, config);
  const auto base = afk::init_params(config, 5);

  TrainRecipe recipe;
  recipe.mode = TrainRecipe::Mode::kPretrain;
  EXPECT_THROW(afk::finetune(base, config, enrollment, recipe), afk::ConfigError);
  recipe.mode = TrainRecipe::Mode::kFinetuneFull;
  EXPECT_THROW(afk::finetune(base, config, {}, recipe), afk::InvalidInputError);
}

// ==== Inference and targets =================================================

TEST(Infer, DuplicatePairsAreBitwiseIdentical) {
  const std::string dir = temp_dir("infer");
  const Corpus corpus = micro_corpus(dir, 1, 18);
  const FieldConfig config = tiny_config();
  const RoomEntry* room = corpus.find_room("roomA");
  const auto ctx = afk::make_room_context(*room, corpus.room_table_path, config);
  const auto params = afk::init_params(config, 6);

  const std::vector<std::pair<Vec3, Vec3>> pairs{
      {{1.0, 1.0, 1.0}, {2.0, 1.5, 1.2}},
      {{0.5, 0.5, 0.5}, {2.5, 2.0, 1.8}},
      {{1.0, 1.0, 1.0}, {2.0, 1.5, 1.2}}};
  const auto out = afk::infer(params, nullptr, pairs, ctx, config);
  ASSERT_EQ(out.size(), 3u);
  for (const auto& ir : out) {
    EXPECT_EQ(ir.sample_rate, config.sample_rate);
    EXPECT_EQ(ir.samples.size(), 64u);
  }
  for (std::size_t i = 0; i < out[0].samples.size(); ++i)
    EXPECT_EQ(out[0].samples[i], out[2].samples[i]);
}

TEST(Targets, RateMismatchRejected) {
  ImpulseResponse ir;
  ir.sample_rate = 8000;
  ir.samples = {1.0, 0.5};
  EXPECT_THROW(afk::rir_target(ir, tiny_config()), afk::RateMismatchError);
}

TEST(RoomGeometry, NeitherMeshNorBoxRejected) {
  RoomEntry bare;
  bare.room_id = "nowhere";
  EXPECT_THROW(afk::room_mesh(bare, "rooms.jsonl"), afk::MissingGeometryError);
}

// ==== Condition evaluation ==================================================

struct EvalWorld {
  std::string dir;
  Corpus corpus;
  FieldConfig config;
  EvalPlan plan;
  TrainRecipe pre, fin;
};

const EvalWorld& eval_world() {
  static const EvalWorld* world = [] {
    auto* w = new EvalWorld;
    w->dir = temp_dir("evalcond");

    CorpusRecipe recipe;
    recipe.rooms = 5;
    recipe.pairs_per_room = 3;
    recipe.target_room_pairs = 4;
    recipe.dims_min = {2.2, 2.0, 2.0};
    recipe.dims_max = {3.0, 2.8, 2.6};
    recipe.absorption_min = 0.4;
    recipe.absorption_max = 0.6;
    recipe.sample_rate = 16000;
    recipe.rir_length_s = 0.128;
    recipe.max_order = 24;
    const auto paths = afk::generate_corpus(recipe, 17, w->dir);
    w->corpus = afk::load_corpus(paths.rir_manifest, paths.room_table);

    w->config = tiny_config();
    w->config.stft.window = 256;
    w->config.stft.hop = 128;
    w->config.stft.fft = 256;
    w->config.rir_length = 2048;

    w->plan.target_room = "room004";
    w->plan.enroll_count = 2;
    w->plan.retrieval_m = 2;
    w->plan.room_limit = 2;
    w->plan.seed = 7;

    w->pre.epochs = 2;
    w->pre.batch_size = 8;
    w->pre.step_size = 1e-3;
    w->fin = w->pre;
    return w;
  }();
  return *world;
}

TEST(EvaluateConditions, DefaultConditionsProduceFiniteRows) {
  const auto& w = eval_world();
  const auto report = afk::evaluate_conditions(w.corpus, w.plan, w.config, w.pre,
                                               w.fin, afk::default_conditions());
  ASSERT_EQ(report.rows.size(), 5u);
  EXPECT_EQ(report.rows[0].pretraining_set, "retrieved");
  EXPECT_EQ(report.rows[0].finetune_method, "lora-1");
  EXPECT_EQ(report.rows[1].finetune_method, "all");
  EXPECT_EQ(report.rows[2].pretraining_set, "random");
  EXPECT_EQ(report.rows[4].pretraining_set, "none");
  for (const auto& row : report.rows) {
    EXPECT_TRUE(std::isfinite(row.rt60_err_pct));
    EXPECT_TRUE(std::isfinite(row.edf_err_db));
    EXPECT_TRUE(std::isfinite(row.drr_err_db));
    EXPECT_GE(row.rt60_err_pct, 0.0);
    EXPECT_GE(row.edf_err_db, 0.0);
    EXPECT_GE(row.drr_err_db, 0.0);
  }
}

TEST(EvaluateConditions, OracleCopyScoresZero) {
  const auto& w = eval_world();
  const std::vector<EvalCondition> conds{{"oracle", "copy", 1, true}};
  const auto report =
      afk::evaluate_conditions(w.corpus, w.plan, w.config, w.pre, w.fin, conds);
  ASSERT_EQ(report.rows.size(), 1u);
  EXPECT_DOUBLE_EQ(report.rows[0].rt60_err_pct, 0.0);
  EXPECT_DOUBLE_EQ(report.rows[0].edf_err_db, 0.0);
  EXPECT_DOUBLE_EQ(report.rows[0].drr_err_db, 0.0);
}

TEST(EvaluateConditions, RerunIsByteIdentical) {
  const auto& w = eval_world();
  const std::vector<EvalCondition> conds{{"retrieved", "lora-1", 1, false},
                                         {"none", "all", 1, false}};
  const auto a =
      afk::evaluate_conditions(w.corpus, w.plan, w.config, w.pre, w.fin, conds);
  const auto b =
      afk::evaluate_conditions(w.corpus, w.plan, w.config, w.pre, w.fin, conds);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].rt60_err_pct, b.rows[i].rt60_err_pct);
    EXPECT_EQ(a.rows[i].edf_err_db, b.rows[i].edf_err_db);
    EXPECT_EQ(a.rows[i].drr_err_db, b.rows[i].drr_err_db);
  }
  afk::write_report_csv(a, w.dir + "/report_a.csv");
  afk::write_report_csv(b, w.dir + "/report_b.csv");
  EXPECT_EQ(slurp(w.dir + "/report_a.csv"), slurp(w.dir + "/report_b.csv"));
}

TEST(EvaluateConditions, BadPlansRejected) {
  const auto& w = eval_world();
  const std::vector<EvalCondition> conds{{"mystery", "all", 1, false}};
  EXPECT_THROW(
      afk::evaluate_conditions(w.corpus, w.plan, w.config, w.pre, w.fin, conds),
      afk::ConfigError);

  EvalPlan bad = w.plan;
  bad.target_room = "ghost";
  EXPECT_THROW(afk::evaluate_conditions(w.corpus, bad, w.config, w.pre, w.fin,
                                        afk::default_conditions()),
               afk::MissingGeometryError);

  bad = w.plan;
  bad.enroll_count = 4;  // target room has exactly 4 RIRs: nothing left to score
  EXPECT_THROW(afk::evaluate_conditions(w.corpus, bad, w.config, w.pre, w.fin,
                                        afk::default_conditions()),
               afk::InvalidInputError);
}

TEST(ReportCsv, FixedFormat) {
  afk::ExperimentReport r;
  r.rows.push_back({"retrieved", "lora-1", 0.125, 3.5, 1.0});
  const std::string dir = temp_dir("reportcsv");
  afk::write_report_csv(r, dir + "/report.csv");
  EXPECT_EQ(slurp(dir + "/report.csv"),
            "pretraining_set,finetune_method,rt60_err_pct,edf_err_db,drr_err_db\n"
            "retrieved,lora-1,0.125000,3.500000,1.000000\n");
}

TEST(ReportCsv, PairMetricsFormat) {
  std::vector<afk::PairMetricsRow> rows;
  rows.push_back({"roomA", "p0", {0.5, 2.0, 0.25}});
  const std::string dir = temp_dir("paircsv");
  afk::write_pair_metrics_csv(rows, dir + "/metrics.csv");
  EXPECT_EQ(slurp(dir + "/metrics.csv"),
            "room_id,pair_id,rt60_err_pct,edf_err_db,drr_err_db\n"
            "roomA,p0,0.500000,2.000000,0.250000\n");
}

}  // namespace

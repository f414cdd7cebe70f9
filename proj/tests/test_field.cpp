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

#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "afk/field.hpp"
#include "afk/random.hpp"

namespace {

using afk::FieldConfig;
using afk::FieldInput;
using afk::LoraAdapterSet;
using afk::Matrix;
using afk::ModelParams;
using afk::Rng;
using afk::SpectrogramTarget;
using afk::TrainSample;

// Small grid (T = 8, F = 9) so finite differences stay cheap.
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

FieldInput random_input(const FieldConfig& config, Rng& rng) {
  FieldInput in;
  auto coord = [&] { return rng.uniform(-1.0, 1.0); };
  in.src = {coord(), coord(), coord()};
  in.rcv = {coord(), coord(), coord()};
  for (int k = 0; k < config.num_bounce_points; ++k)
    in.bounce.push_back({coord(), coord(), coord()});
  return in;
}

SpectrogramTarget random_target(const FieldConfig& config, Rng& rng) {
  SpectrogramTarget t(config.frames(), config.bins());
  for (auto& v : t.values) v = rng.uniform(-3.0, 3.0);
  return t;
}

// ==== Sinusoidal encoding ===================================================

TEST(Encoding, OriginIsAllZeroSinUnitCos) {
  const auto enc = afk::sinusoidal_encode({0, 0, 0}, 4);
  ASSERT_EQ(enc.size(), 24u);
  for (std::size_t i = 0; i < enc.size(); i += 2) {
    EXPECT_DOUBLE_EQ(enc[i], 0.0);
    EXPECT_DOUBLE_EQ(enc[i + 1], 1.0);
  }
}

TEST(Encoding, UnitXAtLevelOne) {
  const auto enc = afk::sinusoidal_encode({1, 0, 0}, 1);
  ASSERT_EQ(enc.size(), 6u);
  EXPECT_NEAR(enc[0], 0.0, 1e-15);  // sin(pi)
  EXPECT_DOUBLE_EQ(enc[1], -1.0);   // cos(pi)
  EXPECT_DOUBLE_EQ(enc[2], 0.0);
  EXPECT_DOUBLE_EQ(enc[3], 1.0);
  EXPECT_DOUBLE_EQ(enc[4], 0.0);
  EXPECT_DOUBLE_EQ(enc[5], 1.0);
}

TEST(Encoding, LengthIsSixPerLevel) {
  for (int levels : {1, 4, 8})
    EXPECT_EQ(afk::sinusoidal_encode({0.3, -0.2, 0.9}, levels).size(),
              static_cast<std::size_t>(6 * levels));
}

TEST(Encoding, RejectsNonFinite) {
  EXPECT_THROW(afk::sinusoidal_encode({std::nan(""), 0, 0}, 2),
               afk::InvalidInputError);
}

TEST(Encoding, NormalizePointMapsBoxToUnitCube) {
  const afk::BoundingBox box{{0, 0, 0}, {4, 2, 10}};
  const auto lo = afk::normalize_point({0, 0, 0}, box);
  const auto hi = afk::normalize_point({4, 2, 10}, box);
  const auto mid = afk::normalize_point({2, 1, 5}, box);
  EXPECT_DOUBLE_EQ(lo.x, -1.0);
  EXPECT_DOUBLE_EQ(hi.z, 1.0);
  EXPECT_DOUBLE_EQ(mid.y, 0.0);
}

// ==== Forward pass ==========================================================

TEST(Forward, ShapeMatchesConfig) {
  const auto config = tiny_config();
  const auto params = afk::init_params(config, 0);
  Rng rng(1);
  const auto out = afk::forward(params, config, random_input(config, rng));
  EXPECT_EQ(out.frames, 8u);
  EXPECT_EQ(out.bins, 9u);
  EXPECT_TRUE(out.finite());
}

TEST(Forward, ZeroBAdaptersChangeNothing) {
  const auto config = tiny_config();
  const auto params = afk::init_params(config, 2);
  const auto adapters = afk::lora_init(params, 2, 7);
  Rng rng(3);
  const auto input = random_input(config, rng);
  const auto base = afk::forward(params, config, input);
  const auto adapted = afk::forward(params, config, input, &adapters);
  ASSERT_EQ(base.values.size(), adapted.values.size());
  for (std::size_t i = 0; i < base.values.size(); ++i)
    EXPECT_EQ(base.values[i], adapted.values[i]);
}

TEST(Forward, BouncePermutationInvariant) {
  const auto config = tiny_config();
  const auto params = afk::init_params(config, 4);
  Rng rng(5);
  const auto input = random_input(config, rng);
  FieldInput shuffled = input;
  std::rotate(shuffled.bounce.begin(), shuffled.bounce.begin() + 1,
              shuffled.bounce.end());
  const auto a = afk::forward(params, config, input);
  const auto b = afk::forward(params, config, shuffled);
  for (std::size_t i = 0; i < a.values.size(); ++i)
    EXPECT_NEAR(a.values[i], b.values[i], 1e-12);
}

TEST(Forward, WrongBounceCountRejected) {
  const auto config = tiny_config();
  const auto params = afk::init_params(config, 4);
  Rng rng(5);
  auto input = random_input(config, rng);
  input.bounce.pop_back();
  EXPECT_THROW(afk::forward(params, config, input), afk::ShapeError);
}

// ==== LoRA algebra ==========================================================

TEST(Lora, HandMergeOfIdentityTrunk) {
  // One 2x2 trunk: W = I, A = (1,0)^T, B = (0,1)^T gives W + BA^T =
  // [[1,0],[1,1]].
  ModelParams params;
  params.layers.resize(4);
  params.layers[2].w = Matrix(2, 2);
  params.layers[2].w(0, 0) = 1.0;
  params.layers[2].w(1, 1) = 1.0;
  params.layers[2].b = {0.0, 0.0};

  LoraAdapterSet adapters;
  adapters.rank = 1;
  adapters.a.emplace_back(2, 1);
  adapters.b.emplace_back(2, 1);
  adapters.a[0](0, 0) = 1.0;
  adapters.b[0](1, 0) = 1.0;

  const auto merged = afk::merge_adapters(params, adapters);
  EXPECT_DOUBLE_EQ(merged.layers[2].w(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(merged.layers[2].w(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(merged.layers[2].w(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(merged.layers[2].w(1, 1), 1.0);
}

TEST(Lora, MergedForwardMatchesAdapterForward) {
  const auto config = tiny_config();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto params = afk::init_params(config, seed);
    auto adapters = afk::lora_init(params, 2, seed + 100);
    Rng rng(seed + 200);
    for (auto& m : adapters.b)
      for (double& v : m.data) v = 0.1 * rng.normal();

    const auto input = random_input(config, rng);
    const auto adapted = afk::forward(params, config, input, &adapters);
    const auto merged = afk::forward(afk::merge_adapters(params, adapters),
                                     config, input);
    for (std::size_t i = 0; i < adapted.values.size(); ++i) {
      const double scale = std::max({std::abs(adapted.values[i]),
                                     std::abs(merged.values[i]), 1.0});
      EXPECT_NEAR(adapted.values[i], merged.values[i], 1e-10 * scale);
    }
  }
}

TEST(Lora, InitShapesAndDeterminism) {
  const auto config = tiny_config();
  const auto params = afk::init_params(config, 1);
  const auto a = afk::lora_init(params, 3, 9);
  const auto b = afk::lora_init(params, 3, 9);
  ASSERT_EQ(a.a.size(), 2u);
  for (std::size_t l = 0; l < a.a.size(); ++l) {
    EXPECT_EQ(a.a[l].rows, 16u);
    EXPECT_EQ(a.a[l].cols, 3u);
    EXPECT_EQ(a.b[l].rows, 16u);
    for (double v : a.b[l].data) EXPECT_DOUBLE_EQ(v, 0.0);
    double max_a = 0.0;
    for (std::size_t i = 0; i < a.a[l].data.size(); ++i) {
      EXPECT_EQ(a.a[l].data[i], b.a[l].data[i]);
      max_a = std::max(max_a, std::abs(a.a[l].data[i]));
    }
    EXPECT_GT(max_a, 0.0);
    EXPECT_LT(max_a, 0.1);  // std 0.01 draws stay small
  }
}

TEST(Lora, RankBoundsEnforced) {
  const auto config = tiny_config();
  const auto params = afk::init_params(config, 1);
  EXPECT_THROW(afk::lora_init(params, 0, 0), afk::RankError);
  EXPECT_THROW(afk::lora_init(params, 17, 0), afk::RankError);
  EXPECT_NO_THROW(afk::lora_init(params, 16, 0));
}

// ==== Loss ==================================================================

TEST(Loss, IdentityIsZero) {
  const auto config = tiny_config();
  Rng rng(1);
  const auto t = random_target(config, rng);
  EXPECT_DOUBLE_EQ(afk::loss(t, t), 0.0);
}

TEST(Loss, ConstantOffsetIsPureGridError) {
  const auto config = tiny_config();
  Rng rng(2);
  const auto target = random_target(config, rng);
  auto pred = target;
  for (auto& v : pred.values) v += 1.0;
  EXPECT_NEAR(afk::loss(pred, target), 1.0, 1e-12);
}

TEST(Loss, NonNegativeAndShapeChecked) {
  const auto config = tiny_config();
  Rng rng(3);
  const auto a = random_target(config, rng);
  const auto b = random_target(config, rng);
  EXPECT_GE(afk::loss(a, b), 0.0);
  SpectrogramTarget wrong(4, 9);
  EXPECT_THROW(afk::loss(a, wrong), afk::ShapeError);
}

// ==== Gradients =============================================================

double batch_loss(const ModelParams& params, const FieldConfig& config,
                  const std::vector<TrainSample>& batch,
                  const LoraAdapterSet* adapters = nullptr) {
  double total = 0.0;
  for (const auto& s : batch)
    total += afk::loss(afk::forward(params, config, s.input, adapters), s.target);
  return total / static_cast<double>(batch.size());
}

void expect_close_to_fd(double analytic, double fd) {
  const double scale = std::max({std::abs(analytic), std::abs(fd), 1e-6});
  EXPECT_NEAR(analytic, fd, 1e-4 * scale);
}

TEST(Gradients, FullModeMatchesFiniteDifferences) {
  const auto config = tiny_config();
  auto params = afk::init_params(config, 0);
  Rng rng(0);
  std::vector<TrainSample> batch;
  for (int i = 0; i < 2; ++i)
    batch.push_back({random_input(config, rng), random_target(config, rng)});

  const auto g = afk::gradients(params, config, batch);
  ASSERT_FALSE(g.lora_mode);
  ASSERT_EQ(g.base.size(), params.layers.size());
  EXPECT_NEAR(g.loss, batch_loss(params, config, batch), 1e-12);

  const double h = 1e-4;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto check = [&](std::vector<double>& values, const std::vector<double>& grad) {
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double keep = values[i];
        values[i] = keep + h;
        const double up = batch_loss(params, config, batch);
        values[i] = keep - h;
        const double down = batch_loss(params, config, batch);
        values[i] = keep;
        expect_close_to_fd(grad[i], (up - down) / (2.0 * h));
      }
    };
    check(params.layers[l].w.data, g.base[l].w.data);
    check(params.layers[l].b, g.base[l].b);
  }
}

TEST(Gradients, LoraModeMatchesFiniteDifferences) {
  const auto config = tiny_config();
  const auto params = afk::init_params(config, 0);
  auto adapters = afk::lora_init(params, 2, 1);
  Rng rng(0);
  for (auto& m : adapters.b)
    for (double& v : m.data) v = 0.05 * rng.normal();

  std::vector<TrainSample> batch;
  for (int i = 0; i < 2; ++i)
    batch.push_back({random_input(config, rng), random_target(config, rng)});

  const auto g = afk::gradients(params, config, batch, &adapters);
  ASSERT_TRUE(g.lora_mode);
  EXPECT_TRUE(g.base.empty());  // base frozen: no gradient buffers at all
  ASSERT_EQ(g.lora_a.size(), 2u);

  const double h = 1e-4;
  for (std::size_t l = 0; l < adapters.a.size(); ++l) {
    auto check = [&](std::vector<double>& values, const std::vector<double>& grad) {
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double keep = values[i];
        values[i] = keep + h;
        const double up = batch_loss(params, config, batch, &adapters);
        values[i] = keep - h;
        const double down = batch_loss(params, config, batch, &adapters);
        values[i] = keep;
        expect_close_to_fd(grad[i], (up - down) / (2.0 * h));
      }
    };
    check(adapters.a[l].data, g.lora_a[l].data);
    check(adapters.b[l].data, g.lora_b[l].data);
  }
}

TEST(Gradients, ExactTieGivesZeroSubgradient) {
  const auto config = tiny_config();
  const auto params = afk::init_params(config, 6);
  Rng rng(7);
  TrainSample s;
  s.input = random_input(config, rng);
  s.target = afk::forward(params, config, s.input);
  const auto g = afk::gradients(params, config, {s});
  EXPECT_DOUBLE_EQ(g.loss, 0.0);
  for (const auto& layer : g.base) {
    for (double v : layer.w.data) EXPECT_DOUBLE_EQ(v, 0.0);
    for (double v : layer.b) EXPECT_DOUBLE_EQ(v, 0.0);
  }
}

TEST(Gradients, OneSgdStepDescends) {
  const auto config = tiny_config();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto params = afk::init_params(config, seed);
    Rng rng(seed + 50);
    std::vector<TrainSample> batch{
        {random_input(config, rng), random_target(config, rng)}};
    const auto g = afk::gradients(params, config, batch);
    const double before = g.loss;
    const double step = 1e-3;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      for (std::size_t i = 0; i < params.layers[l].w.data.size(); ++i)
        params.layers[l].w.data[i] -= step * g.base[l].w.data[i];
      for (std::size_t i = 0; i < params.layers[l].b.size(); ++i)
        params.layers[l].b[i] -= step * g.base[l].b[i];
    }
    EXPECT_LT(batch_loss(params, config, batch), before) << "seed " << seed;
  }
}

TEST(Gradients, NonFiniteParametersRejectedWithContext) {
  const auto config = tiny_config();
  auto params = afk::init_params(config, 8);
  params.trunk(0).w(3, 3) = std::nan("");
  Rng rng(9);
  std::vector<TrainSample> batch{
      {random_input(config, rng), random_target(config, rng)}};
  EXPECT_THROW(afk::gradients(params, config, batch), afk::NumericalError);
}

}  // namespace

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

#ifndef AFK_FIELD_HPP_
#define AFK_FIELD_HPP_

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "afk/error.hpp"
#include "afk/geometry.hpp"
#include "afk/linalg.hpp"
#include "afk/random.hpp"
#include "afk/rir.hpp"
#include "afk/stft.hpp"
#include "afk/vec3.hpp"

namespace afk {

/// Architecture and target-grid shape. The frame count is fixed by the
/// configured RIR length, so every target and prediction shares one grid.
struct FieldConfig {
  int num_bounce_points = 32;  // K
  int encoding_levels = 8;     // L
  int hidden_width = 256;      // d
  int hidden_layers = 4;       // adapted trunk depth
  StftConfig stft;
  int rir_length = 8000;  // samples
  int sample_rate = 16000;

  void check_valid() const {
    if (num_bounce_points < 1 || encoding_levels < 1 || hidden_width < 1 ||
        hidden_layers < 1 || rir_length < 1 || sample_rate < 1)
      throw ConfigError("field config values must be positive");
    stft.check_valid();
  }

  std::size_t frames() const { return stft.num_frames(rir_length); }
  std::size_t bins() const { return stft.bins(); }
  std::size_t encoding_dim() const { return 6 * static_cast<std::size_t>(encoding_levels); }
  std::size_t projector_in() const { return 2 * encoding_dim(); }
  std::size_t fusion_in() const { return 2 * encoding_dim() + hidden_width; }
  std::size_t output_dim() const { return frames() * bins(); }
};

/// Per-axis sin/cos ladder over frequencies 2^0..2^{L-1}; coordinates are
/// expected in [-1, 1].
inline Vector sinusoidal_encode(const Vec3& p, int levels) {
  if (!p.finite()) throw InvalidInputError("encode: non-finite point");
  if (levels < 1) throw InvalidInputError("encode: levels must be >= 1");
  const double pi = 3.14159265358979323846;
  Vector out;
  out.reserve(6 * static_cast<std::size_t>(levels));
  for (int axis = 0; axis < 3; ++axis) {
    const double v = p[axis];
    double freq = pi;
    for (int l = 0; l < levels; ++l) {
      out.push_back(std::sin(freq * v));
      out.push_back(std::cos(freq * v));
      freq *= 2.0;
    }
  }
  return out;
}

/// Maps a point into [-1, 1]^3 by the room's bounding box.
inline Vec3 normalize_point(const Vec3& p, const BoundingBox& bbox) {
  const Vec3 ext = bbox.extent();
  if (!(ext.x > 0.0) || !(ext.y > 0.0) || !(ext.z > 0.0))
    throw InvalidInputError("normalize_point: degenerate bounding box");
  return {2.0 * (p.x - bbox.min_corner.x) / ext.x - 1.0,
          2.0 * (p.y - bbox.min_corner.y) / ext.y - 1.0,
          2.0 * (p.z - bbox.min_corner.z) / ext.z - 1.0};
}

/// One forward query: source, receiver, and K bounce points, all already
/// normalized into [-1, 1]^3.
struct FieldInput {
  Vec3 src;
  Vec3 rcv;
  std::vector<Vec3> bounce;
};

inline FieldInput make_field_input(const Vec3& src, const Vec3& rcv,
                                   const BouncePointSet& bounce,
                                   const BoundingBox& bbox,
                                   const FieldConfig& config) {
  if (bounce.points.size() != static_cast<std::size_t>(config.num_bounce_points))
    throw ShapeError("bounce set has " + std::to_string(bounce.points.size()) +
                     " points, config expects " +
                     std::to_string(config.num_bounce_points));
  FieldInput in;
  in.src = normalize_point(src, bbox);
  in.rcv = normalize_point(rcv, bbox);
  in.bounce.reserve(bounce.points.size());
  for (const Vec3& p : bounce.points) in.bounce.push_back(normalize_point(p, bbox));
  return in;
}

struct Dense {
  Matrix w;
  Vector b;
};

/// Layer order: projector, fusion, trunk x hidden_layers, head.
struct ModelParams {
  std::vector<Dense> layers;

  Dense& projector() { return layers[0]; }
  const Dense& projector() const { return layers[0]; }
  Dense& fusion() { return layers[1]; }
  const Dense& fusion() const { return layers[1]; }
  Dense& trunk(std::size_t i) { return layers[2 + i]; }
  const Dense& trunk(std::size_t i) const { return layers[2 + i]; }
  Dense& head() { return layers.back(); }
  const Dense& head() const { return layers.back(); }
  std::size_t trunk_count() const { return layers.size() - 3; }

  bool finite() const {
    for (const auto& l : layers) {
      if (!l.w.finite()) return false;
      for (double v : l.b)
        if (!std::isfinite(v)) return false;
    }
    return true;
  }
};

/// Rank-r adapters for the square trunk layers: effective weight
/// W + B A^T per adapted layer.
struct LoraAdapterSet {
  int rank = 0;
  std::vector<Matrix> a;  // d_in x r
  std::vector<Matrix> b;  // d_out x r
};

namespace field_detail {

inline Dense glorot_dense(std::size_t out_dim, std::size_t in_dim, Rng& rng) {
  Dense d;
  d.w = Matrix(out_dim, in_dim);
  const double s = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  for (double& v : d.w.data) v = rng.uniform(-s, s);
  d.b.assign(out_dim, 0.0);
  return d;
}

}  // namespace field_detail

inline ModelParams init_params(const FieldConfig& config, std::uint64_t seed) {
  config.check_valid();
  Rng rng(seed);
  const std::size_t d = config.hidden_width;
  ModelParams p;
  p.layers.push_back(field_detail::glorot_dense(d, config.projector_in(), rng));
  p.layers.push_back(field_detail::glorot_dense(d, config.fusion_in(), rng));
  for (int i = 0; i < config.hidden_layers; ++i)
    p.layers.push_back(field_detail::glorot_dense(d, d, rng));
  p.layers.push_back(field_detail::glorot_dense(config.output_dim(), d, rng));
  return p;
}

/// A ~ N(0, 0.01^2), B = 0, so the adapted model starts exactly at the base.
inline LoraAdapterSet lora_init(const ModelParams& params, int rank,
                                std::uint64_t seed) {
  if (rank < 1) throw RankError("lora rank must be >= 1");
  Rng rng(seed);
  LoraAdapterSet set;
  set.rank = rank;
  for (std::size_t i = 0; i < params.trunk_count(); ++i) {
    const Dense& layer = params.trunk(i);
    if (static_cast<std::size_t>(rank) > std::min(layer.w.rows, layer.w.cols))
      throw RankError("lora rank " + std::to_string(rank) +
                      " exceeds trunk layer dimension");
    Matrix a(layer.w.cols, rank);
    for (double& v : a.data) v = 0.01 * rng.normal();
    Matrix b(layer.w.rows, rank);
    set.a.push_back(std::move(a));
    set.b.push_back(std::move(b));
  }
  return set;
}

/// Materializes W + B A^T into a copy of the base parameters.
inline ModelParams merge_adapters(const ModelParams& params,
                                  const LoraAdapterSet& adapters) {
  if (adapters.a.size() != params.trunk_count())
    throw ShapeError("adapter count does not match trunk depth");
  ModelParams merged = params;
  for (std::size_t i = 0; i < params.trunk_count(); ++i) {
    Matrix& w = merged.trunk(i).w;
    const Matrix& a = adapters.a[i];
    const Matrix& b = adapters.b[i];
    if (a.rows != w.cols || b.rows != w.rows || a.cols != b.cols)
      throw ShapeError("adapter shapes do not match trunk layer");
    for (std::size_t r = 0; r < w.rows; ++r)
      for (std::size_t c = 0; c < w.cols; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < a.cols; ++k) acc += b(r, k) * a(c, k);
        w(r, c) += acc;
      }
  }
  return merged;
}

namespace field_detail {

inline Vector tanh_vec(Vector z) {
  for (double& v : z) v = std::tanh(v);
  return z;
}

/// Everything backprop needs from one forward pass.
struct ForwardCache {
  std::vector<Vector> bounce_in;   // e_k, projector inputs
  std::vector<Vector> bounce_act;  // u_k = tanh(W_p e_k + b_p)
  Vector fusion_in;
  std::vector<Vector> hidden;   // h_0 (fusion output) .. h_L
  std::vector<Vector> trunk_u;  // A^T h per trunk layer, lora mode only
  Vector out;
};

inline void check_finite(const Vector& v, const char* layer) {
  for (double x : v)
    if (!std::isfinite(x))
      throw NumericalError(std::string("non-finite activation in ") + layer);
}

inline Vector forward_impl(const ModelParams& params, const LoraAdapterSet* adapters,
                           const FieldConfig& config, const FieldInput& input,
                           ForwardCache* cache, bool guard) {
  if (input.bounce.size() != static_cast<std::size_t>(config.num_bounce_points))
    throw ShapeError("forward: bounce point count mismatch");
  if (adapters && adapters->a.size() != params.trunk_count())
    throw ShapeError("forward: adapter count does not match trunk depth");
  const int L = config.encoding_levels;
  const std::size_t d = config.hidden_width;

  const Vector enc_s = sinusoidal_encode(input.src, L);
  const Vector enc_r = sinusoidal_encode(input.rcv, L);

  // Mean-pooled projector features over bounce points, relative to both
  // endpoints; pooling keeps the forward permutation-invariant.
  Vector pooled(d, 0.0);
  for (const Vec3& p : input.bounce) {
    const Vec3 rel_s{(p.x - input.src.x) * 0.5, (p.y - input.src.y) * 0.5,
                     (p.z - input.src.z) * 0.5};
    const Vec3 rel_r{(p.x - input.rcv.x) * 0.5, (p.y - input.rcv.y) * 0.5,
                     (p.z - input.rcv.z) * 0.5};
    Vector e = sinusoidal_encode(rel_s, L);
    const Vector er = sinusoidal_encode(rel_r, L);
    e.insert(e.end(), er.begin(), er.end());
    Vector z = matvec(params.projector().w, e);
    axpy(z, params.projector().b);
    Vector u = tanh_vec(std::move(z));
    axpy(pooled, u);
    if (cache) {
      cache->bounce_in.push_back(std::move(e));
      cache->bounce_act.push_back(std::move(u));
    }
  }
  const double inv_k = 1.0 / static_cast<double>(input.bounce.size());
  for (double& v : pooled) v *= inv_k;

  Vector fusion_in;
  fusion_in.reserve(config.fusion_in());
  fusion_in.insert(fusion_in.end(), enc_s.begin(), enc_s.end());
  fusion_in.insert(fusion_in.end(), enc_r.begin(), enc_r.end());
  fusion_in.insert(fusion_in.end(), pooled.begin(), pooled.end());

  Vector z = matvec(params.fusion().w, fusion_in);
  axpy(z, params.fusion().b);
  Vector h = tanh_vec(std::move(z));
  if (guard) check_finite(h, "fusion");
  if (cache) {
    cache->fusion_in = std::move(fusion_in);
    cache->hidden.push_back(h);
  }

  for (std::size_t i = 0; i < params.trunk_count(); ++i) {
    Vector zi = matvec(params.trunk(i).w, h);
    axpy(zi, params.trunk(i).b);
    if (adapters) {
      const Vector u = matvec_t(adapters->a[i], h);
      axpy(zi, matvec(adapters->b[i], u));
      if (cache) cache->trunk_u.push_back(u);
    }
    h = tanh_vec(std::move(zi));
    if (guard) check_finite(h, "trunk");
    if (cache) cache->hidden.push_back(h);
  }

  Vector out = matvec(params.head().w, h);
  axpy(out, params.head().b);
  if (guard) check_finite(out, "head");
  if (cache) cache->out = out;
  return out;
}

}  // namespace field_detail

inline SpectrogramTarget forward(const ModelParams& params, const FieldConfig& config,
                                 const FieldInput& input,
                                 const LoraAdapterSet* adapters = nullptr) {
  const Vector out =
      field_detail::forward_impl(params, adapters, config, input, nullptr, false);
  SpectrogramTarget spec(config.frames(), config.bins());
  spec.values.assign(out.begin(), out.end());
  return spec;
}

/// Mean absolute error over the grid plus 0.1 x mean absolute error of the
/// per-frame decay profiles (frame log-energy relative to frame 0), which
/// ignores any constant offset between prediction and target.
inline double loss(const SpectrogramTarget& pred, const SpectrogramTarget& target) {
  if (pred.frames != target.frames || pred.bins != target.bins)
    throw ShapeError("loss: spectrogram shapes differ");
  const std::size_t t_count = pred.frames, f_count = pred.bins;
  double mae = 0.0;
  for (std::size_t i = 0; i < pred.values.size(); ++i)
    mae += std::abs(pred.values[i] - target.values[i]);
  mae /= static_cast<double>(pred.values.size());

  double decay = 0.0;
  double p0 = 0.0, y0 = 0.0;
  for (std::size_t f = 0; f < f_count; ++f) {
    p0 += pred.at(0, f);
    y0 += target.at(0, f);
  }
  for (std::size_t t = 0; t < t_count; ++t) {
    double pt = 0.0, yt = 0.0;
    for (std::size_t f = 0; f < f_count; ++f) {
      pt += pred.at(t, f);
      yt += target.at(t, f);
    }
    decay += std::abs((pt - p0) - (yt - y0)) / static_cast<double>(f_count);
  }
  decay /= static_cast<double>(t_count);
  return mae + 0.1 * decay;
}

namespace field_detail {

inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

/// dL/dpred for the loss above, subgradient 0 at ties.
inline double loss_and_grad(const Vector& pred, const SpectrogramTarget& target,
                            Vector& grad) {
  const std::size_t t_count = target.frames, f_count = target.bins;
  grad.assign(pred.size(), 0.0);
  double mae = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target.values[i];
    mae += std::abs(d);
    grad[i] = sign(d) / static_cast<double>(pred.size());
  }
  mae /= static_cast<double>(pred.size());

  std::vector<double> s(t_count, 0.0);
  double decay = 0.0;
  double p0 = 0.0, y0 = 0.0;
  for (std::size_t f = 0; f < f_count; ++f) {
    p0 += pred[f];
    y0 += target.at(0, f);
  }
  double s_sum = 0.0;
  for (std::size_t t = 0; t < t_count; ++t) {
    double pt = 0.0, yt = 0.0;
    for (std::size_t f = 0; f < f_count; ++f) {
      pt += pred[t * f_count + f];
      yt += target.at(t, f);
    }
    const double e = ((pt - p0) - (yt - y0)) / static_cast<double>(f_count);
    decay += std::abs(e);
    s[t] = sign(e);
    s_sum += s[t];
  }
  decay /= static_cast<double>(t_count);

  const double c = 0.1 / static_cast<double>(t_count * f_count);
  for (std::size_t t = 0; t < t_count; ++t) {
    const double g = c * (s[t] - (t == 0 ? s_sum : 0.0));
    if (g != 0.0)
      for (std::size_t f = 0; f < f_count; ++f) grad[t * f_count + f] += g;
  }
  return mae + 0.1 * decay;
}

}  // namespace field_detail

struct TrainSample {
  FieldInput input;
  SpectrogramTarget target;
};

/// Gradient buffers; base layers are empty in LoRA mode (frozen).
struct GradientSet {
  std::vector<Dense> base;
  std::vector<Matrix> lora_a;
  std::vector<Matrix> lora_b;
  bool lora_mode = false;
  double loss = 0.0;
};

/// Exact reverse-mode gradients of the mean batch loss. LoRA mode trains
/// only A and B; base weights receive no gradient.
inline GradientSet gradients(const ModelParams& params, const FieldConfig& config,
                             const std::vector<TrainSample>& batch,
                             const LoraAdapterSet* adapters = nullptr) {
  if (batch.empty()) throw InvalidInputError("gradients: empty batch");
  using field_detail::ForwardCache;

  GradientSet g;
  g.lora_mode = adapters != nullptr;
  if (g.lora_mode) {
    for (std::size_t i = 0; i < adapters->a.size(); ++i) {
      g.lora_a.emplace_back(adapters->a[i].rows, adapters->a[i].cols);
      g.lora_b.emplace_back(adapters->b[i].rows, adapters->b[i].cols);
    }
  } else {
    for (const Dense& l : params.layers) {
      Dense zero;
      zero.w = Matrix(l.w.rows, l.w.cols);
      zero.b.assign(l.b.size(), 0.0);
      g.base.push_back(std::move(zero));
    }
  }

  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  const std::size_t trunk_count = params.trunk_count();

  for (const TrainSample& sample : batch) {
    ForwardCache cache;
    const Vector out = field_detail::forward_impl(params, adapters, config,
                                                  sample.input, &cache, true);
    if (out.size() != sample.target.values.size())
      throw ShapeError("gradients: target grid does not match model output");

    Vector gout;
    g.loss += inv_batch * field_detail::loss_and_grad(out, sample.target, gout);
    for (double& v : gout) v *= inv_batch;

    // Head.
    const Vector& h_last = cache.hidden.back();
    if (!g.lora_mode) {
      add_outer(g.base.back().w, gout, h_last);
      axpy(g.base.back().b, gout);
    }
    Vector gh = matvec_t(params.head().w, gout);

    // Trunk, reversed.
    for (std::size_t i = trunk_count; i-- > 0;) {
      const Vector& h_out = cache.hidden[i + 1];
      const Vector& h_in = cache.hidden[i];
      Vector gz(gh.size());
      for (std::size_t n = 0; n < gz.size(); ++n)
        gz[n] = gh[n] * (1.0 - h_out[n] * h_out[n]);
      if (g.lora_mode) {
        const Vector& u = cache.trunk_u[i];
        add_outer(g.lora_b[i], gz, u);
        const Vector v = matvec_t(adapters->b[i], gz);
        add_outer(g.lora_a[i], h_in, v);
        gh = matvec_t(params.trunk(i).w, gz);
        axpy(gh, matvec(adapters->a[i], v));
      } else {
        add_outer(g.base[2 + i].w, gz, h_in);
        axpy(g.base[2 + i].b, gz);
        gh = matvec_t(params.trunk(i).w, gz);
      }
    }

    // Fusion.
    {
      const Vector& h0 = cache.hidden[0];
      Vector gz(gh.size());
      for (std::size_t n = 0; n < gz.size(); ++n)
        gz[n] = gh[n] * (1.0 - h0[n] * h0[n]);
      if (!g.lora_mode) {
        add_outer(g.base[1].w, gz, cache.fusion_in);
        axpy(g.base[1].b, gz);
      }
      gh = matvec_t(params.fusion().w, gz);
    }

    // Projector via the mean pool: each bounce point sees gpooled / K.
    if (!g.lora_mode) {
      const std::size_t enc = config.encoding_dim();
      Vector gpooled(gh.begin() + 2 * enc, gh.end());
      const double inv_k = 1.0 / static_cast<double>(cache.bounce_act.size());
      for (std::size_t k = 0; k < cache.bounce_act.size(); ++k) {
        const Vector& u = cache.bounce_act[k];
        Vector gz(u.size());
        for (std::size_t n = 0; n < gz.size(); ++n)
          gz[n] = gpooled[n] * inv_k * (1.0 - u[n] * u[n]);
        add_outer(g.base[0].w, gz, cache.bounce_in[k]);
        axpy(g.base[0].b, gz);
      }
    }
  }
  return g;
}

}  // namespace afk

#endif  // AFK_FIELD_HPP_

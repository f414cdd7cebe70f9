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

#ifndef AFK_STFT_HPP_
#define AFK_STFT_HPP_

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "afk/error.hpp"
#include "afk/fft.hpp"
#include "afk/rir.hpp"

namespace afk {

/// Epsilon inside the log so log-magnitudes stay finite; an all-floor
/// spectrogram maps back to exactly zero magnitude.
constexpr double kLogEps = 1e-8;

struct StftConfig {
  int window = 256;
  int hop = 128;
  int fft = 256;

  void check_valid() const {
    if (window < 2 || hop < 1 || fft < 2 || window > fft || hop > window)
      throw InvalidInputError("stft config: need 2 <= window <= fft, 1 <= hop <= window");
    if ((fft & (fft - 1)) != 0)
      throw InvalidInputError("stft fft size must be a power of two");
  }

  std::size_t bins() const { return static_cast<std::size_t>(fft) / 2 + 1; }

  /// Frames start at t*hop; the last frame is the one whose start still
  /// lies inside the signal, zero-padded past the end.
  std::size_t num_frames(std::size_t samples) const {
    if (samples == 0) return 0;
    return (samples - 1) / static_cast<std::size_t>(hop) + 1;
  }

  /// Sample span covered by `frames` frames.
  std::size_t span(std::size_t frames) const {
    if (frames == 0) return 0;
    return (frames - 1) * static_cast<std::size_t>(hop) +
           static_cast<std::size_t>(window);
  }
};

/// T x F grid of log-magnitudes, ln(|X| + eps), row-major by frame.
struct SpectrogramTarget {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<double> values;

  SpectrogramTarget() = default;
  SpectrogramTarget(std::size_t t, std::size_t f)
      : frames(t), bins(f), values(t * f, 0.0) {}

  double& at(std::size_t t, std::size_t f) { return values[t * bins + f]; }
  double at(std::size_t t, std::size_t f) const { return values[t * bins + f]; }

  bool finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

namespace stft_detail {

inline std::vector<double> hann(int n) {
  std::vector<double> w(n);
  const double pi = 3.14159265358979323846;
  for (int k = 0; k < n; ++k)
    w[k] = 0.5 * (1.0 - std::cos(2.0 * pi * k / n));
  return w;
}

using ComplexFrames = std::vector<std::vector<std::complex<double>>>;

inline ComplexFrames stft_complex(const std::vector<double>& x, const StftConfig& cfg) {
  cfg.check_valid();
  const std::vector<double> w = hann(cfg.window);
  const std::size_t frames = cfg.num_frames(x.size());
  ComplexFrames out(frames);
  std::vector<double> frame(cfg.fft);
  for (std::size_t t = 0; t < frames; ++t) {
    std::fill(frame.begin(), frame.end(), 0.0);
    const std::size_t start = t * static_cast<std::size_t>(cfg.hop);
    for (int k = 0; k < cfg.window; ++k) {
      const std::size_t n = start + k;
      if (n < x.size()) frame[k] = x[n] * w[k];
    }
    out[t] = rfft(frame);
  }
  return out;
}

/// Weighted overlap-add with window-square normalization.
inline std::vector<double> istft(const ComplexFrames& frames, const StftConfig& cfg,
                                 std::size_t out_len) {
  cfg.check_valid();
  const std::vector<double> w = hann(cfg.window);
  std::vector<double> num(cfg.span(frames.size()), 0.0);
  std::vector<double> den(num.size(), 0.0);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const std::vector<double> y = irfft(frames[t], cfg.fft);
    const std::size_t start = t * static_cast<std::size_t>(cfg.hop);
    for (int k = 0; k < cfg.window; ++k) {
      num[start + k] += w[k] * y[k];
      den[start + k] += w[k] * w[k];
    }
  }
  std::vector<double> out(out_len, 0.0);
  for (std::size_t n = 0; n < out_len && n < num.size(); ++n) {
    out[n] = den[n] > 1e-12 ? num[n] / den[n] : 0.0;
  }
  return out;
}

}  // namespace stft_detail

/// Fixed analysis transform behind all spectrogram targets.
inline SpectrogramTarget stft_log_magnitude(const ImpulseResponse& ir,
                                            const StftConfig& cfg = {}) {
  ir.check_valid();
  const auto frames = stft_detail::stft_complex(ir.samples, cfg);
  SpectrogramTarget spec(frames.size(), cfg.bins());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    for (std::size_t f = 0; f < cfg.bins(); ++f) {
      spec.at(t, f) = std::log(std::abs(frames[t][f]) + kLogEps);
    }
  }
  return spec;
}

/// Magnitude grid recovered from log values; exact zero at the floor.
inline std::vector<double> spectrogram_magnitudes(const SpectrogramTarget& spec) {
  std::vector<double> mag(spec.values.size());
  for (std::size_t i = 0; i < mag.size(); ++i)
    mag[i] = std::max(std::exp(spec.values[i]) - kLogEps, 0.0);
  return mag;
}

/// Griffin-Lim phase retrieval: zero-phase start, a fixed number of
/// project-magnitude / re-analyze rounds, then one final inverse.
///
/// Frames are flanked by guard frames pinned to zero magnitude. Without
/// them the overlap-add normalization divides by the lone window taper at
/// the signal edges, and the projection has a fixed point that hides a
/// large spike under the first window zeros.
inline ImpulseResponse synthesize_waveform(const SpectrogramTarget& spec,
                                           int sample_rate, int iterations = 32,
                                           std::size_t target_length = 0,
                                           const StftConfig& cfg = {}) {
  cfg.check_valid();
  if (spec.bins != cfg.bins())
    throw ShapeError("spectrogram bins do not match stft config");
  if (iterations < 0) throw InvalidInputError("iterations must be >= 0");
  if (sample_rate <= 0) throw InvalidInputError("sample rate must be positive");

  const std::vector<double> mag = spectrogram_magnitudes(spec);
  const std::size_t out_len =
      target_length > 0 ? target_length : cfg.span(spec.frames);

  const std::size_t pad =
      static_cast<std::size_t>((cfg.window + cfg.hop - 1) / cfg.hop - 1);
  const std::size_t total = spec.frames + 2 * pad;
  auto target_mag = [&](std::size_t p, std::size_t f) {
    if (p < pad || p >= pad + spec.frames) return 0.0;
    return mag[(p - pad) * spec.bins + f];
  };

  stft_detail::ComplexFrames frames(total);
  for (std::size_t p = 0; p < total; ++p) {
    frames[p].resize(spec.bins);
    for (std::size_t f = 0; f < spec.bins; ++f)
      frames[p][f] = {target_mag(p, f), 0.0};
  }

  std::vector<double> x;
  for (int it = 0; it < iterations; ++it) {
    x = stft_detail::istft(frames, cfg, cfg.span(total));
    const auto re = stft_detail::stft_complex(x, cfg);
    for (std::size_t p = 0; p < total && p < re.size(); ++p) {
      for (std::size_t f = 0; f < spec.bins; ++f) {
        const double want = target_mag(p, f);
        const double m = std::abs(re[p][f]);
        frames[p][f] = m > 0.0 ? re[p][f] * (want / m)
                               : std::complex<double>(want, 0.0);
      }
    }
  }

  const std::vector<double> full =
      stft_detail::istft(frames, cfg, cfg.span(total));
  const std::size_t offset = pad * static_cast<std::size_t>(cfg.hop);
  ImpulseResponse out;
  out.sample_rate = sample_rate;
  out.samples.assign(out_len, 0.0);
  for (std::size_t n = 0; n < out_len && offset + n < full.size(); ++n)
    out.samples[n] = full[offset + n];
  return out;
}

}  // namespace afk

#endif  // AFK_STFT_HPP_

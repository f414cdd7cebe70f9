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

#ifndef AFK_FILTERBANK_HPP_
#define AFK_FILTERBANK_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "afk/error.hpp"
#include "afk/rir.hpp"

namespace afk {

constexpr double kSqrt2 = 1.4142135623730951;

/// Octave-band layout: each band spans center/sqrt(2) .. center*sqrt(2).
struct BandSpec {
  std::vector<double> centers_hz;

  BandSpec() = default;
  explicit BandSpec(std::vector<double> centers) : centers_hz(std::move(centers)) {
    if (centers_hz.empty()) throw InvalidInputError("band spec needs at least one band");
    for (std::size_t i = 0; i + 1 < centers_hz.size(); ++i) {
      if (!(centers_hz[i] < centers_hz[i + 1]))
        throw InvalidInputError("band centers must be strictly increasing");
    }
    for (double c : centers_hz) {
      if (!(c > 0.0) || !std::isfinite(c))
        throw InvalidInputError("band centers must be positive and finite");
    }
  }

  /// 125..4000 Hz octave bands.
  static BandSpec standard() {
    return BandSpec({125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0});
  }

  std::size_t size() const { return centers_hz.size(); }

  /// All band upper edges below Nyquist for the given rate.
  bool fits(int sample_rate) const {
    return centers_hz.back() * kSqrt2 < 0.5 * sample_rate;
  }
};

namespace filter_detail {

struct Biquad {
  double b0, b1, b2, a1, a2;
  double z1 = 0.0, z2 = 0.0;

  // Transposed direct form II.
  double step(double x) {
    double y = b0 * x + z1;
    z1 = b1 * x - a1 * y + z2;
    z2 = b2 * x - a2 * y;
    return y;
  }
};

/// Constant-peak-gain band-pass biquad (RBJ cookbook). Unit gain at center.
inline Biquad bandpass_biquad(double center_hz, double q, int sample_rate) {
  const double w0 = 2.0 * 3.14159265358979323846 * center_hz / sample_rate;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  Biquad bq{};
  bq.b0 = alpha / a0;
  bq.b1 = 0.0;
  bq.b2 = -alpha / a0;
  bq.a1 = -2.0 * std::cos(w0) / a0;
  bq.a2 = (1.0 - alpha) / a0;
  return bq;
}

}  // namespace filter_detail

/// One-octave band-pass around center_hz: a cascade of two band-pass biquads
/// with Q = sqrt(2) (octave bandwidth), i.e. a 4th-order section with unit
/// gain at the center frequency. Output length equals input length.
inline ImpulseResponse band_filter(const ImpulseResponse& ir, double center_hz) {
  ir.check_valid();
  if (!(center_hz > 0.0) || !std::isfinite(center_hz))
    throw BandOutOfRangeError("band center must be positive and finite");
  if (!(center_hz * kSqrt2 < 0.5 * ir.sample_rate))
    throw BandOutOfRangeError("octave band around " + std::to_string(center_hz) +
                              " Hz exceeds Nyquist for fs=" +
                              std::to_string(ir.sample_rate));

  filter_detail::Biquad s1 =
      filter_detail::bandpass_biquad(center_hz, kSqrt2, ir.sample_rate);
  filter_detail::Biquad s2 = s1;

  ImpulseResponse out;
  out.sample_rate = ir.sample_rate;
  out.samples.resize(ir.samples.size());
  for (std::size_t n = 0; n < ir.samples.size(); ++n) {
    out.samples[n] = s2.step(s1.step(ir.samples[n]));
  }
  return out;
}

}  // namespace afk

#endif  // AFK_FILTERBANK_HPP_

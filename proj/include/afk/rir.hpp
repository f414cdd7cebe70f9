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

#ifndef AFK_RIR_HPP_
#define AFK_RIR_HPP_

#include <cmath>
#include <vector>

#include "afk/error.hpp"

namespace afk {

/// Mono room impulse response: dimensionless amplitudes at a fixed rate.
struct ImpulseResponse {
  std::vector<double> samples;
  int sample_rate = 0;

  ImpulseResponse() = default;
  ImpulseResponse(std::vector<double> s, int rate)
      : samples(std::move(s)), sample_rate(rate) {}

  bool valid() const {
    if (samples.empty() || sample_rate <= 0) return false;
    for (double v : samples) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  void check_valid() const {
    if (samples.empty()) throw InvalidInputError("impulse response is empty");
    if (sample_rate <= 0)
      throw InvalidInputError("impulse response sample rate must be positive");
    for (double v : samples) {
      if (!std::isfinite(v))
        throw InvalidInputError("impulse response contains non-finite sample");
    }
  }

  double energy() const {
    double e = 0.0;
    for (double v : samples) e += v * v;
    return e;
  }

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

}  // namespace afk

#endif  // AFK_RIR_HPP_

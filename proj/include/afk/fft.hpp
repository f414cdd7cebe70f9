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

#ifndef AFK_FFT_HPP_
#define AFK_FFT_HPP_

#include <cmath>
#include <complex>
#include <vector>

#include "afk/error.hpp"

namespace afk {

/// In-place radix-2 Cooley-Tukey FFT. Length must be a power of two.
/// inverse = true applies the conjugate transform and the 1/n scale.
inline void fft(std::vector<std::complex<double>>& a, bool inverse = false) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw InvalidInputError("fft length must be a power of two");

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  const double pi = 3.14159265358979323846;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }

  if (inverse) {
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= scale;
  }
}

/// One-sided spectrum (n/2+1 bins) of a real frame of power-of-two length.
inline std::vector<std::complex<double>> rfft(const std::vector<double>& frame) {
  std::vector<std::complex<double>> buf(frame.begin(), frame.end());
  fft(buf);
  buf.resize(frame.size() / 2 + 1);
  return buf;
}

/// Real frame of length n from an n/2+1 one-sided spectrum (conjugate
/// symmetry assumed).
inline std::vector<double> irfft(const std::vector<std::complex<double>>& half,
                                 std::size_t n) {
  if (half.size() != n / 2 + 1)
    throw InvalidInputError("irfft: spectrum size must be n/2+1");
  std::vector<std::complex<double>> buf(n);
  for (std::size_t k = 0; k < half.size(); ++k) buf[k] = half[k];
  for (std::size_t k = half.size(); k < n; ++k) buf[k] = std::conj(buf[n - k]);
  fft(buf, true);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = buf[i].real();
  return out;
}

}  // namespace afk

#endif  // AFK_FFT_HPP_

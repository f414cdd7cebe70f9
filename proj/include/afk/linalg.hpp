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

#ifndef AFK_LINALG_HPP_
#define AFK_LINALG_HPP_

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "afk/error.hpp"

namespace afk {

using Vector = std::vector<double>;

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  bool finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

/// y = M x
inline Vector matvec(const Matrix& m, const Vector& x) {
  if (x.size() != m.cols)
    throw ShapeError("matvec: " + std::to_string(m.rows) + "x" +
                     std::to_string(m.cols) + " times vector of " +
                     std::to_string(x.size()));
  Vector y(m.rows, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* row = m.data.data() + r * m.cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
  return y;
}

/// y = Mᵀ x
inline Vector matvec_t(const Matrix& m, const Vector& x) {
  if (x.size() != m.rows)
    throw ShapeError("matvec_t: " + std::to_string(m.rows) + "x" +
                     std::to_string(m.cols) + " transposed times vector of " +
                     std::to_string(x.size()));
  Vector y(m.cols, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* row = m.data.data() + r * m.cols;
    const double s = x[r];
    for (std::size_t c = 0; c < m.cols; ++c) y[c] += row[c] * s;
  }
  return y;
}

/// M += scale * a bᵀ
inline void add_outer(Matrix& m, const Vector& a, const Vector& b, double scale = 1.0) {
  if (a.size() != m.rows || b.size() != m.cols)
    throw ShapeError("add_outer: outer product shape mismatch");
  for (std::size_t r = 0; r < m.rows; ++r) {
    double* row = m.data.data() + r * m.cols;
    const double s = scale * a[r];
    for (std::size_t c = 0; c < m.cols; ++c) row[c] += s * b[c];
  }
}

inline void axpy(Vector& y, const Vector& x, double scale = 1.0) {
  if (x.size() != y.size()) throw ShapeError("axpy: length mismatch");
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += scale * x[i];
}

}  // namespace afk

#endif  // AFK_LINALG_HPP_

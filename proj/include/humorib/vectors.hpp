/*
 * Copyright 2026 The humorib Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cmath>
#include <span>

#include "humorib/types.hpp"

namespace humorib {

inline constexpr double kUnitNormTolerance = 1e-6;

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InputError("embedding dimension mismatch: " +
                     std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// Scales `v` to unit length in place. A zero vector cannot be normalized.
inline void l2_normalize(Embedding& v) {
  const double n = l2_norm(v);
  if (!(n > 0.0) || !std::isfinite(n))
    throw InputError("cannot normalize a zero or non-finite vector");
  for (double& x : v) x /= n;
}

inline bool is_unit_norm(std::span<const double> v,
                         double tol = kUnitNormTolerance) {
  return std::abs(l2_norm(v) - 1.0) <= tol;
}

/// Cosine similarity of two unit vectors (a plain dot product).
inline double cosine_unit(std::span<const double> a, std::span<const double> b) {
  return dot(a, b);
}

/// Cosine similarity for arbitrary non-zero vectors.
inline double cosine(std::span<const double> a, std::span<const double> b) {
  const double d = dot(a, b);
  const double n = l2_norm(a) * l2_norm(b);
  if (!(n > 0.0)) throw InputError("cosine of a zero vector");
  return d / n;
}

}  // namespace humorib

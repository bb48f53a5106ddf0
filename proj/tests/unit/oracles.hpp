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

// Reference implementations written independently of the library, used to
// cross-check it on randomized fixtures.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

namespace humorib::oracle {

/// Repeated linear scans for the best remaining entry under
/// (combined, compression, index) ordering; non-finite entries are skipped.
inline std::vector<std::size_t> top_k(const std::vector<double>& comp,
                                      const std::vector<double>& rel, double alpha,
                                      std::size_t k) {
  const std::size_t n = comp.size();
  std::vector<bool> used(n, false);
  std::vector<std::size_t> out;
  while (out.size() < k) {
    std::size_t best = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (used[j] || !std::isfinite(rel[j]) || !std::isfinite(comp[j])) continue;
      if (best == n) {
        best = j;
        continue;
      }
      const double cj = comp[j] + alpha * rel[j];
      const double cb = comp[best] + alpha * rel[best];
      if (cj < cb || (cj == cb && comp[j] < comp[best])) best = j;
    }
    if (best == n) break;
    used[best] = true;
    out.push_back(best);
  }
  return out;
}

/// Length penalties evaluated in extended precision.
inline std::vector<double> length_penalties(const std::vector<double>& ce,
                                            const std::vector<double>& len) {
  long double sum_ce = 0, sum_len = 0;
  for (double x : ce) sum_ce += x;
  for (double x : len) sum_len += x;
  const long double n = static_cast<long double>(len.size());
  const long double mean_len = sum_len / n;
  const long double beta = (sum_ce / n) / mean_len;
  std::vector<double> out;
  for (double l : len) out.push_back(static_cast<double>(beta * std::fabs(l - mean_len)));
  return out;
}

/// Indices of the min(k, 3) lowest cross-entropies, earlier index first on ties.
inline std::vector<std::size_t> lowest_ce(const std::vector<double>& ce, std::size_t k) {
  std::vector<std::size_t> out;
  std::vector<bool> used(ce.size(), false);
  const std::size_t want = std::min({k, std::size_t{3}, ce.size()});
  while (out.size() < want) {
    std::size_t best = ce.size();
    for (std::size_t j = 0; j < ce.size(); ++j)
      if (!used[j] && (best == ce.size() || ce[j] < ce[best])) best = j;
    used[best] = true;
    out.push_back(best);
  }
  return out;
}

/// Attribution from a value function over every proper non-empty subset
/// (bitmask), optionally with the empty and full sets as well.
inline std::vector<std::optional<double>> subset_attribution(
    std::size_t n, const std::function<double(std::uint64_t)>& value, bool boundary) {
  const std::uint64_t full = (std::uint64_t{1} << n) - 1;
  std::vector<std::optional<double>> phi(n);
  for (std::size_t i = 0; i < n; ++i) {
    double with = 0, without = 0;
    std::size_t nw = 0, nwo = 0;
    for (std::uint64_t m = 0; m <= full; ++m) {
      const bool proper = m != 0 && m != full;
      if (!proper && !boundary) continue;
      if ((m >> i) & 1U) {
        with += value(m);
        ++nw;
      } else {
        without += value(m);
        ++nwo;
      }
    }
    if (nw && nwo) phi[i] = with / static_cast<double>(nw) - without / static_cast<double>(nwo);
  }
  return phi;
}

}  // namespace humorib::oracle

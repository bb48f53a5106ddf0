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

// Sentence-level Shapley attribution of a prompt.
//
// Each coalition S of prompt sentences is answered by the generator and
// valued as v(S) = cos(emb(r0), emb(r_S)) where r0 answers the full prompt.
// The attribution of sentence i is
//
//   phi(i) = mean_{S contains i} v(S) - mean_{S lacks i} v(S)
//
// over the evaluated coalitions: all leave-one-out subsets, a sample of the
// other proper non-empty subsets and, by default, the two boundary
// coalitions (the full prompt, reusing r0, and the empty prompt). With the
// boundary pair every "with i" coalition has its "without i" twin in exact
// mode, so a sentence the generator ignores gets exactly zero.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "humorib/backends.hpp"

namespace humorib {

/// Membership mask over the prompt sentences.
using Coalition = std::vector<bool>;

/// Sentences end at '.', '!' or '?' followed by whitespace; a newline always
/// ends a sentence. Bare list numbers ("1.", "3. 1.") stay with the text
/// after them.
/// Empty pieces are dropped.
inline std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& line : split_lines(text)) {
    std::size_t start = 0;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if ((c == '.' || c == '!' || c == '?') &&
          (i + 1 == line.size() || is_space(line[i + 1]))) {
        auto piece = trim(std::string_view(line).substr(start, i + 1 - start));
        const bool list_number =
            c == '.' &&
            std::any_of(piece.begin(), piece.end(),
                        [](char d) { return std::isdigit(static_cast<unsigned char>(d)); }) &&
            std::all_of(piece.begin(), piece.end(), [](char d) {
              return d == '.' || is_space(d) || std::isdigit(static_cast<unsigned char>(d));
            });
        if (list_number && i + 1 < line.size()) continue;
        if (!piece.empty()) out.push_back(std::move(piece));
        start = i + 1;
      }
    }
    auto rest = trim(std::string_view(line).substr(std::min(start, line.size())));
    if (!rest.empty()) out.push_back(std::move(rest));
  }
  return out;
}

struct AblationOptions {
  std::size_t exact_threshold = 10;  // enumerate when n <= this
  std::size_t max_samples = 4096;    // cap on sampled coalitions beyond leave-one-out
  bool boundary_coalitions = true;   // also value the full and the empty prompt
  std::size_t workers = 4;           // concurrent subset generations
};

namespace shap_detail {

inline std::size_t popcount(const Coalition& c) {
  return static_cast<std::size_t>(std::count(c.begin(), c.end(), true));
}

inline Coalition from_mask(std::uint64_t mask, std::size_t n) {
  Coalition c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = (mask >> i) & 1U;
  return c;
}

}  // namespace shap_detail

/// Leave-one-out coalitions (always) plus round(ratio * (2^n - n - 2)) of the
/// remaining proper non-empty coalitions, drawn without replacement.
/// ratio = 1 with n <= exact_threshold enumerates every proper non-empty
/// coalition. Larger n is sampled up to `max_samples` with a warning.
inline std::vector<Coalition> sample_ablations(std::size_t n, double ratio,
                                               std::mt19937_64& rng,
                                               const AblationOptions& opts = {}) {
  using namespace shap_detail;
  if (n < 1) throw InputError("ablation needs at least one sentence");
  if (!(ratio > 0.0) || ratio > 1.0) throw InputError("sampling ratio must be in (0, 1]");
  std::vector<Coalition> out;
  if (n == 1) return out;  // no proper non-empty coalition exists
  for (std::size_t i = 0; i < n; ++i) {
    Coalition c(n, true);
    c[i] = false;
    out.push_back(std::move(c));
  }
  const long double remaining = std::pow(2.0L, static_cast<long double>(n)) -
                                static_cast<long double>(n) - 2.0L;
  if (remaining <= 0.0L) return out;
  long double wanted = std::round(static_cast<long double>(ratio) * remaining);
  if (wanted > static_cast<long double>(opts.max_samples)) {
    log_warning("sentence ablation capped at " + std::to_string(opts.max_samples) +
                " sampled subsets for n=" + std::to_string(n));
    wanted = static_cast<long double>(opts.max_samples);
  }
  const auto target = static_cast<std::size_t>(wanted);
  if (target == 0) return out;

  if (n <= opts.exact_threshold && n < 63) {
    std::vector<std::uint64_t> pool;
    const std::uint64_t full = (std::uint64_t{1} << n) - 1;
    for (std::uint64_t m = 1; m < full; ++m) {
      const auto bits = static_cast<std::size_t>(__builtin_popcountll(m));
      if (bits <= n - 2) pool.push_back(m);
    }
    if (target < pool.size()) {
      // Partial Fisher-Yates, then back to enumeration order.
      for (std::size_t i = 0; i < target; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng() % (pool.size() - i));
        std::swap(pool[i], pool[j]);
      }
      pool.resize(target);
      std::sort(pool.begin(), pool.end());
    }
    for (auto m : pool) out.push_back(from_mask(m, n));
    return out;
  }

  std::set<Coalition> seen;
  const std::size_t max_attempts = target * 20 + 100;
  for (std::size_t a = 0; a < max_attempts && seen.size() < target; ++a) {
    Coalition c(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = (rng() >> 63) != 0;
    const auto size = popcount(c);
    if (size == 0 || size + 1 >= n) continue;
    if (seen.insert(c).second) out.push_back(std::move(c));
  }
  return out;
}

inline std::string render_coalition(const std::vector<std::string>& sentences,
                                    const Coalition& c) {
  std::string out;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (!c[i]) continue;
    if (!out.empty()) out.push_back(' ');
    out += sentences[i];
  }
  return out;
}

/// `proto` supplies temperature, seed and image for every generation; its
/// prompt is replaced by each coalition's text.
inline AttributionReport sentence_shap(const std::vector<std::string>& sentences,
                                       Generator& generator, Embedder& embedder,
                                       double ratio, std::mt19937_64& rng,
                                       const GenerationRequest& proto = {},
                                       const AblationOptions& opts = {}) {
  const std::size_t n = sentences.size();
  if (n < 2) throw InputError("attribution needs at least two sentences");
  AttributionReport report;
  report.sentences = sentences;
  report.ratio = ratio;
  report.exact = ratio >= 1.0 && n <= opts.exact_threshold;

  auto ask = [&](const std::string& prompt) -> std::optional<std::string> {
    GenerationRequest req = proto;
    req.prompt = prompt;
    try {
      auto text = trim(generator.generate(req).text);
      if (text.empty()) return std::nullopt;
      return text;
    } catch (const BackendError& e) {
      log_warning(std::string("ablation generation failed: ") + e.what());
      return std::nullopt;
    }
  };

  const Coalition full(n, true);
  auto base = ask(render_coalition(sentences, full));
  if (!base) throw GenerationError("no base response for attribution");
  report.base_response = *base;

  std::vector<Coalition> pending;
  if (opts.boundary_coalitions) pending.emplace_back(n, false);
  for (auto& c : sample_ablations(n, ratio, rng, opts)) pending.push_back(std::move(c));

  std::vector<std::optional<std::string>> answers(pending.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t j = next++; j < pending.size(); j = next++)
      answers[j] = ask(render_coalition(sentences, pending[j]));
  };
  {
    std::vector<std::jthread> pool;
    const auto extra = std::min(std::max<std::size_t>(opts.workers, 1), pending.size());
    for (std::size_t t = 1; t < extra; ++t) pool.emplace_back(work);
    work();
  }

  std::vector<Coalition> coalitions;
  std::vector<std::string> responses;
  if (opts.boundary_coalitions) {
    coalitions.push_back(full);
    responses.push_back(report.base_response);
  }
  for (std::size_t j = 0; j < pending.size(); ++j) {
    if (!answers[j]) continue;
    coalitions.push_back(std::move(pending[j]));
    responses.push_back(std::move(*answers[j]));
  }

  std::vector<std::string> texts{report.base_response};
  texts.insert(texts.end(), responses.begin(), responses.end());
  const auto embs = embedder.embed(texts);
  std::vector<double> value(coalitions.size());
  for (std::size_t j = 0; j < coalitions.size(); ++j)
    value[j] = cosine(embs[0], embs[j + 1]);

  report.samples_used = coalitions.size();
  report.phi.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double with = 0.0, without = 0.0;
    std::size_t n_with = 0, n_without = 0;
    for (std::size_t j = 0; j < coalitions.size(); ++j) {
      if (coalitions[j][i]) {
        with += value[j];
        ++n_with;
      } else {
        without += value[j];
        ++n_without;
      }
    }
    if (n_with && n_without)
      report.phi[i] = with / static_cast<double>(n_with) -
                      without / static_cast<double>(n_without);
  }
  return report;
}

/// Plain-text ranking, highest attribution first.
inline std::string format_attribution_table(const AttributionReport& r) {
  std::vector<std::size_t> order(r.sentences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double pa = r.phi[a].value_or(-INFINITY), pb = r.phi[b].value_or(-INFINITY);
    return pa > pb;
  });
  std::ostringstream out;
  out << "rank  phi        sentence\n";
  std::size_t rank = 1;
  for (std::size_t i : order) {
    char buf[32];
    if (r.phi[i]) {
      std::snprintf(buf, sizeof buf, "%+.6f", *r.phi[i]);
    } else {
      std::snprintf(buf, sizeof buf, "%-10s", "n/a");
    }
    out << std::to_string(rank++);
    out << std::string(rank <= 10 ? 5 : 4, ' ') << buf << "  " << r.sentences[i] << '\n';
  }
  return out.str();
}

}  // namespace humorib

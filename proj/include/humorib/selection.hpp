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

// Information-bottleneck selection of implications and candidates.
//
// An implication p is scored against the current inputs X (caption,
// descriptions, previously selected implications) and the candidate
// explanations R of the previous hop:
//
//   compression(p) = max_i cos(X_i, p)                 (redundancy, lower is better)
//   relevance(p)   = min_i CE(R_i | Z_p) + LP_i        (Z_p = inputs + p as text)
//   combined(p)    = compression(p) + alpha * relevance(p)
//
// with LP_i = beta * |L_i - mean(L)|, beta = mean(CE) / mean(L). The k
// implications with the smallest combined score are kept. Candidates are
// pruned to the (at most three) with the lowest cross-entropy.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <tuple>

#include "humorib/backends.hpp"

namespace humorib {

inline constexpr std::size_t kMaxRetainedCandidates = 3;
inline constexpr double kFailedScore = std::numeric_limits<double>::infinity();

/// Maximum cosine similarity between an implication and any context vector.
inline double compression_term(std::span<const double> implication_emb,
                               const std::vector<Embedding>& context_embs) {
  if (context_embs.empty()) throw InputError("compression needs a non-empty context");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& x : context_embs) best = std::max(best, cosine_unit(x, implication_emb));
  return best;
}

/// LP_i = beta * |L_i - mean(L)| with beta = mean(CE) / mean(L).
inline std::vector<double> length_penalties(std::span<const double> cross_entropies,
                                            std::span<const double> lengths) {
  if (cross_entropies.empty()) throw InputError("length penalty needs candidates");
  if (cross_entropies.size() != lengths.size())
    throw InputError("cross-entropy and length counts differ");
  const double n = static_cast<double>(lengths.size());
  const double mean_ce =
      std::accumulate(cross_entropies.begin(), cross_entropies.end(), 0.0) / n;
  const double mean_len = std::accumulate(lengths.begin(), lengths.end(), 0.0) / n;
  if (!(mean_len > 0.0)) throw InputError("mean candidate length must be positive");
  const double beta = mean_ce / mean_len;
  std::vector<double> lp;
  lp.reserve(lengths.size());
  for (double len : lengths) lp.push_back(beta * std::abs(len - mean_len));
  return lp;
}

inline std::vector<double> length_penalties(std::span<const CandidateExplanation> candidates) {
  std::vector<double> ces, lens;
  for (const auto& c : candidates) {
    if (!c.cross_entropy) throw InputError("candidate lacks a cross-entropy score");
    if (c.token_length < 1) throw InputError("candidate token length must be >= 1");
    ces.push_back(*c.cross_entropy);
    lens.push_back(static_cast<double>(c.token_length));
  }
  return length_penalties(ces, lens);
}

/// min_i CE(candidate_i | context) + LP_i, where LP is computed over the
/// candidates the scorer could score. Returns +inf when none could be.
inline double relevance_term(std::string_view context_for_scoring,
                             std::span<const CandidateExplanation> candidates,
                             Scorer& scorer) {
  if (candidates.empty()) throw InputError("relevance needs at least one candidate");
  std::vector<double> ces, lens;
  for (const auto& c : candidates) {
    try {
      ces.push_back(scorer.score_cross_entropy(context_for_scoring, c.text));
      lens.push_back(static_cast<double>(c.token_length));
    } catch (const BackendError& e) {
      log_warning(std::string("cross-entropy scoring failed: ") + e.what());
    }
  }
  if (ces.empty()) return kFailedScore;
  const auto lp = length_penalties(ces, lens);
  double best = kFailedScore;
  for (std::size_t i = 0; i < ces.size(); ++i) best = std::min(best, ces[i] + lp[i]);
  return best;
}

// ---------------------------------------------------------------------------
// Implication ranking on precomputed scores

/// Indices of the k smallest `compression + alpha * relevance`, best first.
/// Ties go to lower compression, then to the earlier index. Entries with a
/// non-finite relevance are never selected.
inline std::vector<std::size_t> rank_top_k(std::span<const double> compression,
                                           std::span<const double> relevance,
                                           double alpha, std::size_t k) {
  if (compression.size() != relevance.size())
    throw InputError("compression and relevance counts differ");
  if (!(alpha >= 0.0)) throw InputError("alpha must be >= 0");
  using Key = std::tuple<double, double, std::size_t>;
  std::vector<Key> keys;
  keys.reserve(compression.size());
  for (std::size_t j = 0; j < compression.size(); ++j) {
    if (!std::isfinite(relevance[j]) || !std::isfinite(compression[j])) continue;
    keys.emplace_back(compression[j] + alpha * relevance[j], compression[j], j);
  }
  const std::size_t take = std::min(k, keys.size());
  std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(take),
                    keys.end());
  std::vector<std::size_t> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(std::get<2>(keys[i]));
  return out;
}

// ---------------------------------------------------------------------------
// Implication selection against backends

/// Inputs for scoring one hop's pool. `rendered_contexts[j]` is the textual
/// scoring context for pool item j (inputs plus that implication).
struct SelectionContext {
  Embedding caption_emb;
  std::vector<Embedding> description_embs;
  std::vector<Embedding> prior_implication_embs;
  std::vector<CandidateExplanation> candidates;
  std::vector<std::string> rendered_contexts;

  std::vector<Embedding> context_embs() const {
    std::vector<Embedding> all;
    all.push_back(caption_emb);
    all.insert(all.end(), description_embs.begin(), description_embs.end());
    all.insert(all.end(), prior_implication_embs.begin(), prior_implication_embs.end());
    return all;
  }

  void validate(std::size_t pool_size) const {
    if (candidates.empty()) throw InputError("selection needs at least one candidate");
    if (rendered_contexts.size() != pool_size)
      throw InputError("one rendered scoring context per implication is required");
    const auto dim = caption_emb.size();
    for (const auto& v : context_embs()) {
      if (v.size() != dim) throw InputError("selection context dimensions differ");
    }
  }
};

/// Embeds pool items that lack an embedding (one batched call).
inline void ensure_embeddings(std::vector<Implication>& pool, Embedder& embedder) {
  std::vector<std::string> texts;
  std::vector<std::size_t> where;
  for (std::size_t j = 0; j < pool.size(); ++j) {
    if (!pool[j].embedding) {
      texts.push_back(pool[j].text);
      where.push_back(j);
    }
  }
  if (texts.empty()) return;
  auto embs = embedder.embed(texts);
  if (embs.size() != texts.size()) throw BackendError("embedder returned wrong count", false);
  for (std::size_t i = 0; i < where.size(); ++i) {
    if (!is_unit_norm(embs[i])) throw BackendError("embedder returned a non-unit vector", false);
    pool[where[i]].embedding = std::move(embs[i]);
  }
}

/// Scores every pool item in place (compression, relevance, combined).
inline std::vector<Implication> score_implications(std::vector<Implication> pool,
                                                   const SelectionContext& ctx,
                                                   double alpha, Embedder& embedder,
                                                   Scorer& scorer) {
  if (!(alpha >= 0.0)) throw InputError("alpha must be >= 0");
  ctx.validate(pool.size());
  if (pool.empty()) return pool;
  ensure_embeddings(pool, embedder);
  const auto context = ctx.context_embs();
  for (std::size_t j = 0; j < pool.size(); ++j) {
    auto& p = pool[j];
    p.compression_score = compression_term(*p.embedding, context);
    p.relevance_score = relevance_term(ctx.rendered_contexts[j], ctx.candidates, scorer);
    p.combined_score = std::isfinite(*p.relevance_score)
                           ? *p.compression_score + alpha * *p.relevance_score
                           : kFailedScore;
  }
  return pool;
}

/// The k best already-scored implications, best first.
inline std::vector<Implication> pick_top_k(const std::vector<Implication>& scored,
                                           double alpha, std::size_t k) {
  std::vector<double> comp, rel;
  for (const auto& p : scored) {
    if (!p.compression_score || !p.relevance_score)
      throw InputError("implication has not been scored");
    comp.push_back(*p.compression_score);
    rel.push_back(*p.relevance_score);
  }
  std::vector<Implication> out;
  for (std::size_t j : rank_top_k(comp, rel, alpha, k)) out.push_back(scored[j]);
  return out;
}

inline std::vector<Implication> select_implications(std::vector<Implication> pool,
                                                    const SelectionContext& ctx,
                                                    std::size_t k, double alpha,
                                                    Embedder& embedder, Scorer& scorer) {
  if (pool.empty()) throw InputError("cannot select from an empty pool");
  auto scored = score_implications(std::move(pool), ctx, alpha, embedder, scorer);
  return pick_top_k(scored, alpha, k);
}

// ---------------------------------------------------------------------------
// Candidate pruning

/// Keeps the min(k, 3) candidates with the lowest CE given `context`, in
/// ascending CE order (stable). Unscorable candidates are dropped; nullopt
/// when none could be scored.
inline std::optional<std::vector<CandidateExplanation>> select_candidates(
    std::vector<CandidateExplanation> candidates, std::string_view context,
    std::size_t k, Scorer& scorer) {
  if (candidates.empty()) throw InputError("no candidates to select from");
  if (k < 1) throw InputError("k must be >= 1");
  std::vector<CandidateExplanation> scored;
  for (auto& c : candidates) {
    try {
      c.cross_entropy = scorer.score_cross_entropy(context, c.text);
      scored.push_back(std::move(c));
    } catch (const BackendError& e) {
      log_warning(std::string("candidate scoring failed: ") + e.what());
    }
  }
  if (scored.empty()) return std::nullopt;
  const auto lp = length_penalties(scored);
  for (std::size_t i = 0; i < scored.size(); ++i) scored[i].length_penalty = lp[i];
  std::stable_sort(scored.begin(), scored.end(),
                   [](const CandidateExplanation& a, const CandidateExplanation& b) {
                     return *a.cross_entropy < *b.cross_entropy;
                   });
  scored.resize(std::min({k, kMaxRetainedCandidates, scored.size()}));
  return scored;
}

// ---------------------------------------------------------------------------
// Pool cap via spherical k-means

struct KMeansResult {
  std::vector<Embedding> centroids;
  std::vector<std::size_t> assignment;
  std::size_t iterations = 0;
};

namespace kmeans_detail {

inline double draw_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Squared Euclidean distance between unit vectors: 2 - 2 cos.
inline double sq_dist(const Embedding& a, const Embedding& b) {
  return std::max(0.0, 2.0 - 2.0 * cosine_unit(a, b));
}

/// Index sampled with probability proportional to `weights`.
inline std::size_t sample_weighted(std::span<const double> weights, double total,
                                   std::mt19937_64& rng) {
  const double r = draw_unit(rng) * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (r < acc) return i;
  }
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return 0;
}

}  // namespace kmeans_detail

/// Greedy k-means++ seeding (several trials per step, keep the one with the
/// lowest potential). Stops early if every point already sits on a center.
inline std::vector<std::size_t> kmeanspp_seed(const std::vector<Embedding>& points,
                                              std::size_t k, std::mt19937_64& rng) {
  using namespace kmeans_detail;
  const std::size_t n = points.size();
  std::vector<std::size_t> centers;
  if (n == 0 || k == 0) return centers;
  centers.push_back(static_cast<std::size_t>(rng() % n));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(points[i], points[centers[0]]);
  const std::size_t trials =
      2 + static_cast<std::size_t>(std::log(static_cast<double>(k)));
  while (centers.size() < k) {
    const double potential = std::accumulate(d2.begin(), d2.end(), 0.0);
    if (!(potential > 0.0)) break;
    std::size_t best = n;
    double best_potential = std::numeric_limits<double>::infinity();
    std::vector<double> best_d2;
    for (std::size_t t = 0; t < trials; ++t) {
      const std::size_t cand = sample_weighted(d2, potential, rng);
      std::vector<double> next(n);
      double pot = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        next[i] = std::min(d2[i], sq_dist(points[i], points[cand]));
        pot += next[i];
      }
      if (pot < best_potential) {
        best_potential = pot;
        best = cand;
        best_d2 = std::move(next);
      }
    }
    centers.push_back(best);
    d2 = std::move(best_d2);
  }
  return centers;
}

/// Lloyd iterations on the unit sphere: assign by maximum cosine, centroid
/// is the renormalized member mean. Empty clusters keep their centroid.
inline KMeansResult spherical_kmeans(const std::vector<Embedding>& points, std::size_t k,
                                     std::uint64_t seed, std::size_t max_iter = 100) {
  KMeansResult res;
  const std::size_t n = points.size();
  if (n == 0) return res;
  std::mt19937_64 rng(seed);
  for (std::size_t c : kmeanspp_seed(points, k, rng)) res.centroids.push_back(points[c]);
  const std::size_t kk = res.centroids.size();
  const std::size_t dim = points.front().size();
  res.assignment.assign(n, kk);
  for (std::size_t it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_cos = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < kk; ++c) {
        const double cs = cosine_unit(points[i], res.centroids[c]);
        if (cs > best_cos) {
          best_cos = cs;
          best = c;
        }
      }
      if (res.assignment[i] != best) {
        res.assignment[i] = best;
        changed = true;
      }
    }
    res.iterations = it + 1;
    if (!changed) break;
    for (std::size_t c = 0; c < kk; ++c) {
      Embedding mean(dim, 0.0);
      std::size_t members = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (res.assignment[i] != c) continue;
        ++members;
        for (std::size_t d = 0; d < dim; ++d) mean[d] += points[i][d];
      }
      if (members == 0 || !(l2_norm(mean) > 1e-12)) continue;
      l2_normalize(mean);
      res.centroids[c] = std::move(mean);
    }
  }
  return res;
}

/// Caps the pool at `max_pool` by clustering (k = max_pool) and keeping the
/// member closest to each centroid. Output keeps input order. Pools within
/// the cap pass through unchanged. Embeddings are attached to the survivors.
inline std::vector<Implication> cap_pool(std::vector<Implication> implications,
                                         Embedder& embedder, std::size_t max_pool,
                                         std::uint64_t rng_seed) {
  if (max_pool < 1) throw InputError("max_pool must be >= 1");
  if (implications.size() <= max_pool) return implications;
  ensure_embeddings(implications, embedder);
  std::vector<Embedding> points;
  for (const auto& p : implications) points.push_back(*p.embedding);
  const auto km = spherical_kmeans(points, max_pool, rng_seed);
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < km.centroids.size(); ++c) {
    std::size_t best = points.size();
    double best_cos = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (km.assignment[i] != c) continue;
      const double cs = cosine_unit(points[i], km.centroids[c]);
      if (cs > best_cos) {
        best_cos = cs;
        best = i;
      }
    }
    if (best < points.size()) keep.push_back(best);
  }
  std::sort(keep.begin(), keep.end());
  keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
  std::vector<Implication> out;
  out.reserve(keep.size());
  for (std::size_t i : keep) out.push_back(std::move(implications[i]));
  return out;
}

}  // namespace humorib

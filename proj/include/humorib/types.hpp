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
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "humorib/common.hpp"

namespace humorib {

enum class Dataset { memecap, newyorker, yesbut };

inline std::string_view to_string(Dataset d) {
  switch (d) {
    case Dataset::memecap: return "memecap";
    case Dataset::newyorker: return "newyorker";
    case Dataset::yesbut: return "yesbut";
  }
  return "newyorker";
}

inline Dataset parse_dataset(std::string_view s) {
  if (s == "memecap") return Dataset::memecap;
  if (s == "newyorker") return Dataset::newyorker;
  if (s == "yesbut") return Dataset::yesbut;
  throw InputError("unknown dataset tag: " + std::string(s));
}

/// One task instance: an image, its caption and the gold explanations.
struct Episode {
  std::string id;
  std::string image;  // path to the image file; empty when not available
  std::string caption;
  Dataset dataset = Dataset::newyorker;
  std::vector<std::string> references;

  void validate(bool require_references = false) const {
    if (id.empty()) throw InputError("episode id is empty");
    if (trim_view(caption).empty())
      throw InputError("episode " + id + " has an empty caption");
    if (require_references && references.empty())
      throw InputError("episode " + id + " has no references to evaluate");
  }

  bool operator==(const Episode&) const = default;
};

/// A literal image description, one line of generator output.
struct Description {
  std::string text;
  int sentence_count = 1;

  bool operator==(const Description&) const = default;
};

using Embedding = std::vector<double>;

/// A unit of elicited world knowledge plus the scores it received.
struct Implication {
  std::string text;
  int hop_born = 1;
  std::optional<Embedding> embedding;
  std::optional<double> compression_score;
  std::optional<double> relevance_score;
  std::optional<double> combined_score;

  bool operator==(const Implication&) const = default;
};

struct CandidateExplanation {
  std::string text;
  int hop_born = 0;
  std::size_t token_length = 1;
  std::optional<double> cross_entropy;
  std::optional<double> length_penalty;

  bool operator==(const CandidateExplanation&) const = default;
};

/// Pipeline state after hop `hop`. Hop 0 holds the descriptions, the seed
/// implications (unscored) and the initial candidate.
struct HopState {
  int hop = 0;
  std::vector<Description> descriptions;
  std::vector<Implication> implication_pool;
  std::vector<Implication> selected_implications;  // newly selected at this hop
  std::vector<CandidateExplanation> candidates;

  bool operator==(const HopState&) const = default;
};

enum class CeReduction { mean, sum };
enum class MultiRef { max, mean };

struct PipelineConfig {
  double alpha = 0.7;
  int hops = 2;
  int k = 3;
  int max_pool = 15;
  double gen_temperature = 0.8;
  double eval_temperature = 0.2;
  int description_window = 2;
  std::uint64_t rng_seed = 0;
  int max_output_tokens = 512;
  CeReduction ce_reduction = CeReduction::mean;
  MultiRef multi_ref = MultiRef::max;
  bool store_embeddings = false;

  void validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha))
      throw InputError("alpha must be a finite value >= 0");
    if (hops < 0) throw InputError("hops must be >= 0");
    if (k < 1) throw InputError("k must be >= 1");
    if (max_pool < k) throw InputError("max_pool must be >= k");
    if (description_window < 1)
      throw InputError("description_window must be >= 1");
    if (gen_temperature < 0.0 || eval_temperature < 0.0)
      throw InputError("temperatures must be >= 0");
    if (max_output_tokens < 1) throw InputError("max_output_tokens must be >= 1");
  }

  bool operator==(const PipelineConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Evaluation

enum class AtomSource { reference, prediction, description };

struct AtomicFact {
  std::string text;
  AtomSource source = AtomSource::reference;

  bool operator==(const AtomicFact&) const = default;
};

enum class VerifyDirection { recall, precision };

struct AtomVerdict {
  std::string atom;
  bool verified = false;
  VerifyDirection direction = VerifyDirection::recall;

  bool operator==(const AtomVerdict&) const = default;
};

struct InstanceScore {
  std::string id;
  std::string split;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<AtomVerdict> atom_verdicts;

  bool operator==(const InstanceScore&) const = default;
};

inline double f1_score(double precision, double recall) {
  const double denom = precision + recall;
  return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

struct SplitSummary {
  std::string split;
  std::size_t instances = 0;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  double macro_f1 = 0.0;
  double f1_of_means = 0.0;  // harmonic mean of mean_precision / mean_recall

  bool operator==(const SplitSummary&) const = default;
};

struct EvalAggregate {
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  double macro_f1 = 0.0;
  double f1_of_means = 0.0;
  double stddev_precision = 0.0;  // sample stddev across splits
  double stddev_recall = 0.0;
  double stddev_macro_f1 = 0.0;
  std::size_t splits = 0;
  std::size_t unscorable = 0;

  bool operator==(const EvalAggregate&) const = default;
};

struct EvalReport {
  std::vector<InstanceScore> per_instance;
  std::vector<SplitSummary> per_split;
  EvalAggregate aggregate;

  bool operator==(const EvalReport&) const = default;
};

// ---------------------------------------------------------------------------
// Attribution

struct AttributionReport {
  std::vector<std::string> sentences;
  std::string base_response;
  std::vector<std::optional<double>> phi;  // nullopt: no with/without pair
  std::size_t samples_used = 0;
  double ratio = 1.0;
  bool exact = false;

  bool operator==(const AttributionReport&) const = default;
};

}  // namespace humorib

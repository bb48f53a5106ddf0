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

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "humorib/types.hpp"
#include "humorib/vectors.hpp"

namespace humorib {

// Model roles. Every implementation must be safe to call from several
// episode workers at once.

struct GenerationRequest {
  std::string prompt;
  std::optional<std::string> image;  // image file path
  double temperature = 0.8;
  int max_output_tokens = 512;
  std::optional<std::uint64_t> seed;

  void validate() const {
    if (temperature < 0.0) throw InputError("temperature must be >= 0");
    if (max_output_tokens < 1) throw InputError("max_output_tokens must be >= 1");
  }
};

struct Generation {
  std::string text;
  double latency_ms = 0.0;
};

class Generator {
 public:
  virtual ~Generator() = default;
  virtual Generation generate(const GenerationRequest& req) = 0;
  /// Identifies backend + model; part of the response cache key.
  virtual std::string id() const = 0;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  /// One unit-norm vector per input, all of the same dimension.
  virtual std::vector<Embedding> embed(const std::vector<std::string>& texts) = 0;
  virtual std::string id() const = 0;
};

class Scorer {
 public:
  virtual ~Scorer() = default;
  /// Cross-entropy of `target` given the text-only `context`.
  virtual double score_cross_entropy(std::string_view context,
                                     std::string_view target) = 0;
  virtual std::string id() const = 0;
};

inline void check_embed_inputs(const std::vector<std::string>& texts) {
  if (texts.empty()) throw InputError("embed called with no texts");
  for (const auto& t : texts) {
    if (trim_view(t).empty()) throw InputError("embed called with an empty text");
  }
}

inline void check_score_inputs(std::string_view context, std::string_view target) {
  if (trim_view(context).empty()) throw InputError("scoring context is empty");
  if (whitespace_token_count(target) == 0)
    throw InputError("scoring target has no tokens");
}

/// The four model handles a run needs. `judge` evaluates predictions.
struct Backends {
  std::shared_ptr<Generator> generator;
  std::shared_ptr<Embedder> embedder;
  std::shared_ptr<Scorer> scorer;
  std::shared_ptr<Generator> judge;
};

// ---------------------------------------------------------------------------
// Call log

struct CallRecord {
  std::string role;
  std::string prompt_hash;
  double latency_ms = 0.0;

  bool operator==(const CallRecord&) const = default;
};

/// Append-only log of backend calls made for one episode.
class CallLog {
 public:
  void add(CallRecord rec) {
    std::lock_guard<std::mutex> lock(mu_);
    calls_.push_back(std::move(rec));
  }

  std::vector<CallRecord> snapshot() const {
    std::lock_guard<std::mutex> lock(mu_);
    return calls_;
  }

  std::size_t count(std::string_view role) const {
    std::lock_guard<std::mutex> lock(mu_);
    std::size_t n = 0;
    for (const auto& c : calls_) n += (c.role == role);
    return n;
  }

 private:
  mutable std::mutex mu_;
  std::vector<CallRecord> calls_;
};

/// Calls the generator and appends a call record when `log` is given.
inline Generation call_generator(Generator& gen, const GenerationRequest& req,
                                 std::string_view role, CallLog* log) {
  req.validate();
  Generation out = gen.generate(req);
  if (log) {
    log->add({std::string(role), sha256_hex(req.prompt).substr(0, 16),
              out.latency_ms});
  }
  return out;
}

}  // namespace humorib

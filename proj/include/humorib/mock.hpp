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

// Deterministic stand-ins for the three model roles. Outputs are pure
// functions of the inputs (plus the request seed), so any pipeline run on
// these backends replays bit for bit.

#include <atomic>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <shared_mutex>
#include <sstream>
#include <utility>

#include "humorib/backends.hpp"

namespace humorib {

namespace mock_detail {

inline constexpr std::string_view kVocabulary[] = {
    "caption",  "cartoon",  "contrast", "office",   "doctor",   "snowman",
    "summer",   "winter",   "scarecrow", "plunger", "fairy",    "economy",
    "ticket",   "taxi",     "airport",  "price",    "meme",     "cat",
    "smug",     "angry",    "woman",    "man",      "book",     "giant",
    "window",   "surprise", "irony",    "norm",     "job",      "costume",
    "absurd",   "everyday", "ritual",   "expects",  "reverses", "joke",
    "literal",  "metaphor", "pun",      "social",   "habit",    "office",
    "boss",     "meeting",  "coffee",   "deadline", "dog",      "owner",
    "phone",    "screen",   "budget",   "hidden",   "cost",     "trip",
    "art",      "surreal",  "body",     "exam",     "table",    "patient",
    "magic",    "wand",     "chores",   "kitchen"};

inline std::uint64_t request_hash(const GenerationRequest& req) {
  std::string key = req.prompt;
  key.push_back('\0');
  key += req.seed ? std::to_string(*req.seed) : std::string("-");
  return hash64(key);
}

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
inline double unit_uniform(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline std::vector<std::string> word_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

}  // namespace mock_detail

/// Generator that synthesizes numbered lines of vocabulary words from a hash
/// of (prompt, seed). A script can intercept requests; returning nullopt
/// falls through to synthesis.
class MockGenerator : public Generator {
 public:
  using Script = std::function<std::optional<std::string>(const GenerationRequest&)>;

  explicit MockGenerator(std::string name = "mock", Script script = {})
      : name_(std::move(name)), script_(std::move(script)) {}

  Generation generate(const GenerationRequest& req) override {
    req.validate();
    calls_.fetch_add(1);
    if (script_) {
      if (auto scripted = script_(req)) return {std::move(*scripted), 0.0};
    }
    return {synthesize(req), 0.0};
  }

  std::string id() const override { return "mock-generator:" + name_; }

  std::size_t calls() const { return calls_.load(); }
  void reset_calls() { calls_.store(0); }

  /// One to six numbered lines of 6-11 words each.
  static std::string synthesize(const GenerationRequest& req) {
    std::mt19937_64 rng(mock_detail::request_hash(req));
    constexpr std::size_t vocab = std::size(mock_detail::kVocabulary);
    const std::size_t lines = 1 + rng() % 6;
    std::ostringstream out;
    for (std::size_t l = 0; l < lines; ++l) {
      if (l) out << '\n';
      out << (l + 1) << ". The";
      const std::size_t words = 6 + rng() % 6;
      for (std::size_t w = 0; w < words; ++w) {
        out << ' ' << mock_detail::kVocabulary[rng() % vocab];
      }
      out << '.';
    }
    return out.str();
  }

 private:
  std::string name_;
  Script script_;
  std::atomic<std::size_t> calls_{0};
};

/// Hashed bag-of-words embedder: each lowercase alphanumeric token maps to a
/// fixed pseudo-random direction and a text embeds to the normalized sum.
/// Identical texts embed identically and texts sharing most words are close.
class MockEmbedder : public Embedder {
 public:
  explicit MockEmbedder(std::size_t dim = 256) : dim_(dim) {
    if (dim_ == 0) throw InputError("embedding dimension must be >= 1");
  }

  /// Pins the embedding of an exact text (normalized on insertion).
  void set_fixture(const std::string& text, Embedding v) {
    if (v.size() != dim_) throw InputError("fixture embedding has wrong dimension");
    l2_normalize(v);
    std::unique_lock lock(mu_);
    fixtures_[text] = std::move(v);
  }

  std::vector<Embedding> embed(const std::vector<std::string>& texts) override {
    check_embed_inputs(texts);
    calls_.fetch_add(1);
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
  }

  std::string id() const override { return "mock-embedder:" + std::to_string(dim_); }
  std::size_t dimension() const { return dim_; }
  std::size_t calls() const { return calls_.load(); }
  void reset_calls() { calls_.store(0); }

 private:
  Embedding embed_one(const std::string& text) const {
    {
      std::shared_lock lock(mu_);
      if (auto it = fixtures_.find(text); it != fixtures_.end()) return it->second;
    }
    auto tokens = mock_detail::word_tokens(text);
    if (tokens.empty()) tokens.push_back(trim(text));
    Embedding v(dim_, 0.0);
    for (const auto& tok : tokens) {
      std::mt19937_64 rng(hash64("tok:" + tok));
      for (double& x : v) x += 2.0 * mock_detail::unit_uniform(rng()) - 1.0;
    }
    l2_normalize(v);
    return v;
  }

  std::size_t dim_;
  mutable std::shared_mutex mu_;
  std::map<std::string, Embedding> fixtures_;
  std::atomic<std::size_t> calls_{0};
};

/// Scorer returning a hash-derived mean per-token cross-entropy in
/// [0.5, 5.0), overridable per (context, target) through a fixture table.
class MockScorer : public Scorer {
 public:
  using FailurePredicate =
      std::function<bool(std::string_view context, std::string_view target)>;

  explicit MockScorer(CeReduction reduction = CeReduction::mean)
      : reduction_(reduction) {}

  void set_fixture(const std::string& context, const std::string& target,
                   double value) {
    std::unique_lock lock(mu_);
    fixtures_[{context, target}] = value;
  }

  /// Fixture keyed on the target alone, for contexts that are rendered prompts.
  void set_target_fixture(const std::string& target, double value) {
    std::unique_lock lock(mu_);
    target_fixtures_[target] = value;
  }

  /// Calls for which `pred` holds throw a BackendError.
  void fail_when(FailurePredicate pred) { fail_ = std::move(pred); }

  double score_cross_entropy(std::string_view context,
                             std::string_view target) override {
    check_score_inputs(context, target);
    calls_.fetch_add(1);
    if (fail_ && fail_(context, target))
      throw BackendError("mock scorer failure", false);
    {
      std::shared_lock lock(mu_);
      auto it = fixtures_.find({std::string(context), std::string(target)});
      if (it != fixtures_.end()) return it->second;
      auto jt = target_fixtures_.find(std::string(target));
      if (jt != target_fixtures_.end()) return jt->second;
    }
    std::string key(context);
    key.push_back('\0');
    key.append(target);
    const double mean = 0.5 + 4.5 * mock_detail::unit_uniform(hash64(key));
    if (reduction_ == CeReduction::sum)
      return mean * static_cast<double>(whitespace_token_count(target));
    return mean;
  }

  std::string id() const override { return "mock-scorer"; }
  std::size_t calls() const { return calls_.load(); }
  void reset_calls() { calls_.store(0); }

 private:
  CeReduction reduction_;
  mutable std::shared_mutex mu_;
  std::map<std::pair<std::string, std::string>, double> fixtures_;
  std::map<std::string, double> target_fixtures_;
  FailurePredicate fail_;
  std::atomic<std::size_t> calls_{0};
};

// ---------------------------------------------------------------------------
// Overlap judge: a scripted MockGenerator answering the decomposition and
// verification prompts without a model. Decomposition splits on sentence
// ends; verification says Yes when most content words of the atom occur in
// the other text.

namespace mock_detail {

/// Text following `label` up to the next blank line.
inline std::optional<std::string> field_after(std::string_view prompt,
                                              std::string_view label) {
  const auto pos = prompt.rfind(label);
  if (pos == std::string_view::npos) return std::nullopt;
  std::string_view rest = prompt.substr(pos + label.size());
  const auto end = rest.find("\n\n");
  if (end != std::string_view::npos) rest = rest.substr(0, end);
  return trim(rest);
}

inline std::string overlap_judge(std::string_view prompt) {
  if (auto s1 = field_after(prompt, "[Sentence1]:")) {
    auto s2 = field_after(prompt, "[Sentence2]:").value_or("");
    std::set<std::string> haystack;
    for (auto& t : word_tokens(s2)) haystack.insert(std::move(t));
    std::size_t total = 0, hit = 0;
    for (const auto& t : word_tokens(*s1)) {
      if (t.size() < 4) continue;
      ++total;
      hit += haystack.count(t);
    }
    return (total > 0 && 2 * hit >= total) ? "Yes" : "No";
  }
  if (auto text = field_after(prompt, "[Text]:")) {
    std::ostringstream out;
    std::size_t n = 0;
    std::string cur;
    auto flush = [&] {
      auto s = trim(cur);
      if (!s.empty()) {
        if (n) out << '\n';
        out << ++n << ". " << s;
      }
      cur.clear();
    };
    for (char c : *text) {
      cur.push_back(c);
      if (c == '.' || c == '!' || c == '?') flush();
    }
    flush();
    return out.str();
  }
  return "No";
}

}  // namespace mock_detail

inline std::shared_ptr<MockGenerator> make_overlap_judge() {
  return std::make_shared<MockGenerator>(
      "overlap-judge", [](const GenerationRequest& req) -> std::optional<std::string> {
        return mock_detail::overlap_judge(req.prompt);
      });
}

inline Backends make_mock_backends(std::size_t embed_dim = 256,
                                   CeReduction reduction = CeReduction::mean) {
  Backends b;
  b.generator = std::make_shared<MockGenerator>();
  b.embedder = std::make_shared<MockEmbedder>(embed_dim);
  b.scorer = std::make_shared<MockScorer>(reduction);
  b.judge = make_overlap_judge();
  return b;
}

}  // namespace humorib

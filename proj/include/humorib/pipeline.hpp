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

#include <map>
#include <thread>

#include <nlohmann/json.hpp>

#include "humorib/generation.hpp"
#include "humorib/record.hpp"
#include "humorib/selection.hpp"

namespace humorib {

inline constexpr std::string_view kPipelineMode = "ib";

// ---------------------------------------------------------------------------
// Logging decorators so embed / score calls land in the episode call log.

class LoggedEmbedder : public Embedder {
 public:
  LoggedEmbedder(Embedder& inner, CallLog& log) : inner_(inner), log_(log) {}

  std::vector<Embedding> embed(const std::vector<std::string>& texts) override {
    auto out = inner_.embed(texts);
    log_.add({"embed", sha256_hex(join(texts, "\n")).substr(0, 16), 0.0});
    return out;
  }

  std::string id() const override { return inner_.id(); }

 private:
  Embedder& inner_;
  CallLog& log_;
};

class LoggedScorer : public Scorer {
 public:
  LoggedScorer(Scorer& inner, CallLog& log) : inner_(inner), log_(log) {}

  double score_cross_entropy(std::string_view context, std::string_view target) override {
    std::string key(context);
    key.push_back('\0');
    key.append(target);
    log_.add({"score", sha256_hex(key).substr(0, 16), 0.0});
    return inner_.score_cross_entropy(context, target);
  }

  std::string id() const override { return inner_.id(); }

 private:
  Scorer& inner_;
  CallLog& log_;
};

// ---------------------------------------------------------------------------
// Pipeline

namespace pipeline_detail {

inline std::vector<Implication> strip_embeddings(std::vector<Implication> items,
                                                 const PipelineConfig& cfg) {
  if (!cfg.store_embeddings) {
    for (auto& p : items) p.embedding.reset();
  }
  return items;
}

inline EpisodeRecord new_record(const Episode& ep, std::string_view mode,
                                const PipelineConfig& cfg) {
  EpisodeRecord rec;
  rec.episode_id = ep.id;
  rec.image = ep.image;
  rec.caption = ep.caption;
  rec.dataset = ep.dataset;
  rec.mode = std::string(mode);
  rec.config = cfg;
  return rec;
}

inline void flag(EpisodeRecord& rec, std::string f) {
  rec.flags.push_back(std::move(f));
  if (rec.status == RecordStatus::ok) rec.status = RecordStatus::partial;
}

}  // namespace pipeline_detail

/// Runs hop 0 (descriptions, seed implications, initial candidate), then H
/// rounds of cap / implication selection / candidate generation / pruning /
/// follow-up elicitation, then the final answer. Failures are caught and
/// recorded; whatever state was reached stays in the record.
inline EpisodeRecord run_episode(const Episode& ep, const PipelineConfig& cfg,
                                 const Backends& backends, const TemplateLibrary& templates,
                                 Tokenizer tokenizer = whitespace_token_count) {
  using pipeline_detail::flag;
  using pipeline_detail::strip_embeddings;
  EpisodeRecord rec = pipeline_detail::new_record(ep, kPipelineMode, cfg);
  CallLog log;
  try {
    cfg.validate();
    ep.validate();
    LoggedEmbedder embedder(*backends.embedder, log);
    LoggedScorer scorer(*backends.scorer, log);
    GenerationContext gen{*backends.generator, templates, cfg, tokenizer, &log};
    const auto k = static_cast<std::size_t>(cfg.k);

    // Hop 0
    const auto descriptions = generate_descriptions(ep, gen);
    auto pool = generate_seed_implications(ep, descriptions, gen);
    auto initial = generate_candidate(ep, descriptions, {}, {}, 0, gen);
    if (!initial) throw GenerationError("no initial candidate for episode " + ep.id);
    std::vector<CandidateExplanation> candidates{*initial};
    rec.hop_states.push_back(HopState{0, descriptions, pool, {}, candidates});

    std::vector<Implication> cumulative;
    std::set<std::string> seen_selected;

    for (int hop = 1; hop <= cfg.hops; ++hop) {
      HopState state{hop, descriptions, {}, {}, candidates};
      if (pool.empty()) {
        flag(rec, "empty_pool_hop_" + std::to_string(hop));
        rec.hop_states.push_back(std::move(state));
        continue;
      }
      pool = cap_pool(std::move(pool), embedder, static_cast<std::size_t>(cfg.max_pool),
                      cfg.rng_seed + static_cast<std::uint64_t>(hop));

      // Context: caption, descriptions, previously selected implications.
      std::vector<std::string> ctx_texts{ep.caption};
      for (const auto& d : descriptions) ctx_texts.push_back(d.text);
      for (const auto& p : cumulative) ctx_texts.push_back(p.text);
      auto ctx_embs = embedder.embed(ctx_texts);
      SelectionContext sel;
      sel.caption_emb = ctx_embs[0];
      sel.description_embs.assign(ctx_embs.begin() + 1,
                                  ctx_embs.begin() + 1 + static_cast<std::ptrdiff_t>(descriptions.size()));
      sel.prior_implication_embs.assign(
          ctx_embs.begin() + 1 + static_cast<std::ptrdiff_t>(descriptions.size()), ctx_embs.end());
      sel.candidates = candidates;
      const auto prior_texts = texts_of(cumulative);
      for (const auto& p : pool) {
        auto texts = prior_texts;
        texts.push_back(p.text);
        sel.rendered_contexts.push_back(
            render_candidate_prompt(templates, ep, descriptions, texts, {}));
      }

      auto scored = score_implications(std::move(pool), sel, cfg.alpha, embedder, scorer);
      auto selected = pick_top_k(scored, cfg.alpha, k);
      state.implication_pool = strip_embeddings(scored, cfg);
      state.selected_implications = strip_embeddings(selected, cfg);

      // One new candidate per newly selected implication.
      std::vector<CandidateExplanation> fresh;
      for (const auto& p : selected) {
        if (auto c = generate_candidate(ep, descriptions, {p}, candidates, hop, gen)) {
          fresh.push_back(std::move(*c));
        }
      }
      if (fresh.empty()) {
        if (!selected.empty()) flag(rec, "candidate_fallback_hop_" + std::to_string(hop));
      } else {
        const auto eq2_context = render_candidate_prompt(
            templates, ep, descriptions, texts_of(selected), texts_of(candidates));
        if (auto kept = select_candidates(std::move(fresh), eq2_context, k, scorer)) {
          candidates = std::move(*kept);
        } else {
          flag(rec, "candidate_scoring_fallback_hop_" + std::to_string(hop));
        }
      }
      state.candidates = candidates;

      for (const auto& p : selected) {
        seen_selected.insert(p.text);
        cumulative.push_back(p);
      }

      pool.clear();
      if (hop < cfg.hops) {
        std::set<std::string> seen(seen_selected);
        for (const auto& p : selected) {
          try {
            for (auto& q : generate_followup_implications(ep, descriptions, p, hop + 1, gen)) {
              if (seen.insert(q.text).second) pool.push_back(std::move(q));
            }
          } catch (const BackendError& e) {
            log_warning("follow-up generation failed for episode " + ep.id + ": " + e.what());
            flag(rec, "followup_failed_hop_" + std::to_string(hop + 1));
          }
        }
      }
      rec.hop_states.push_back(std::move(state));
    }

    const auto& last = rec.hop_states.back();
    auto answer = generate_final_answer(ep, last.selected_implications, last.candidates, gen);
    rec.final_prompt = std::move(answer.prompt);
    rec.final_answer = std::move(answer.text);
  } catch (const std::exception& e) {
    rec.status = RecordStatus::failed;
    rec.error = e.what();
  }
  rec.calls = log.snapshot();
  return rec;
}

/// Generator calls a pipeline run makes, given its observed branch sizes:
/// description + seed windows + initial candidate + one candidate per
/// selected implication + one follow-up call per implication selected
/// before the last hop + final answer.
inline std::size_t generator_call_budget(std::size_t num_descriptions,
                                         const std::vector<std::size_t>& selected_per_hop,
                                         const PipelineConfig& cfg) {
  std::size_t calls = 1;
  calls += description_window_count(num_descriptions,
                                    static_cast<std::size_t>(cfg.description_window));
  calls += 1;
  for (std::size_t h = 0; h < selected_per_hop.size(); ++h) {
    calls += selected_per_hop[h];
    if (static_cast<int>(h) + 1 < cfg.hops) calls += selected_per_hop[h];
  }
  return calls + 1;
}

/// Same budget read off a finished record.
inline std::size_t generator_call_budget(const EpisodeRecord& rec) {
  if (rec.hop_states.empty()) return 0;
  std::vector<std::size_t> selected;
  for (std::size_t h = 1; h < rec.hop_states.size(); ++h)
    selected.push_back(rec.hop_states[h].selected_implications.size());
  return generator_call_budget(rec.hop_states[0].descriptions.size(), selected, rec.config);
}

/// Scorer calls: pool size x previous candidate count for relevance, plus
/// one pruning call per new candidate. Assumes no candidate generation came
/// back empty (true for records without a candidate flag).
inline std::size_t scorer_call_budget(const EpisodeRecord& rec) {
  std::size_t calls = 0;
  for (std::size_t h = 1; h < rec.hop_states.size(); ++h) {
    const auto& cur = rec.hop_states[h];
    calls += cur.implication_pool.size() * rec.hop_states[h - 1].candidates.size();
    calls += cur.selected_implications.size();
  }
  return calls;
}

/// Embedder calls: per hop with a non-empty pool, one batch for the pool
/// (inside the cap or the scoring) and one for the selection context.
inline std::size_t embed_call_budget(const EpisodeRecord& rec) {
  std::size_t calls = 0;
  for (std::size_t h = 1; h < rec.hop_states.size(); ++h)
    calls += rec.hop_states[h].implication_pool.empty() ? 0 : 2;
  return calls;
}

// ---------------------------------------------------------------------------
// Baselines

enum class BaselineMode { zs, cot, sr, sr_noc };

inline std::string_view to_string(BaselineMode m) {
  switch (m) {
    case BaselineMode::zs: return "zs";
    case BaselineMode::cot: return "cot";
    case BaselineMode::sr: return "sr";
    case BaselineMode::sr_noc: return "sr_noc";
  }
  return "zs";
}

inline BaselineMode parse_baseline_mode(std::string_view s) {
  if (s == "zs") return BaselineMode::zs;
  if (s == "cot") return BaselineMode::cot;
  if (s == "sr") return BaselineMode::sr;
  if (s == "sr_noc" || s == "sr-noc") return BaselineMode::sr_noc;
  throw InputError("unknown baseline mode: " + std::string(s));
}

inline constexpr int kRefinementSteps = 2;

/// Pulls "Explanation" out of a {"Reasoning": ..., "Explanation": ...}
/// answer, tolerating surrounding prose and code fences.
inline std::optional<std::string> parse_cot_explanation(std::string_view text) {
  const auto open = text.find('{');
  const auto close = text.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open)
    return std::nullopt;
  auto parsed = nlohmann::json::parse(text.substr(open, close - open + 1), nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) return std::nullopt;
  for (const char* key : {"Explanation", "explanation"}) {
    if (parsed.contains(key) && parsed[key].is_string()) {
      auto s = trim(parsed[key].get<std::string>());
      if (!s.empty()) return s;
    }
  }
  return std::nullopt;
}

inline EpisodeRecord run_baseline(const Episode& ep, BaselineMode mode,
                                  const PipelineConfig& cfg, const Backends& backends,
                                  const TemplateLibrary& templates) {
  EpisodeRecord rec = pipeline_detail::new_record(ep, to_string(mode), cfg);
  CallLog log;
  try {
    cfg.validate();
    ep.validate();
    GenerationContext gen{*backends.generator, templates, cfg, whitespace_token_count, &log};
    const auto image_kind = templates.dataset_line("image_kind", ep.dataset);
    auto ask = [&](TemplateName name, PlaceholderMap values, bool with_image,
                   std::string_view role) {
      values.emplace("image_kind", image_kind);
      values.emplace("caption", ep.caption);
      auto prompt = templates.render(name, values);
      auto out = call_generator(gen.generator,
                                gen.request(prompt, with_image ? image_of(ep)
                                                               : std::optional<std::string>{}),
                                role, &log);
      return std::make_pair(std::move(prompt), trim(out.text));
    };

    std::string prompt, answer;
    switch (mode) {
      case BaselineMode::zs:
        std::tie(prompt, answer) = ask(TemplateName::zs, {}, true, "zs");
        break;
      case BaselineMode::cot: {
        std::string raw;
        std::tie(prompt, raw) = ask(TemplateName::cot, {}, true, "cot");
        if (auto expl = parse_cot_explanation(raw)) {
          answer = *expl;
        } else {
          answer = raw;
          pipeline_detail::flag(rec, "cot_parse_fallback");
        }
        break;
      }
      case BaselineMode::sr:
      case BaselineMode::sr_noc: {
        std::tie(prompt, answer) = ask(TemplateName::zs, {}, true, "sr_generator");
        for (int step = 0; step < kRefinementSteps; ++step) {
          if (mode == BaselineMode::sr) {
            // The critic sees caption and candidate only, as text.
            auto feedback =
                ask(TemplateName::sr_critic,
                    {{"critic_goal", templates.dataset_line("critic_goal", ep.dataset)},
                     {"candidate", answer}},
                    false, "sr_critic")
                    .second;
            std::tie(prompt, answer) =
                ask(TemplateName::sr_generator,
                    {{"candidates", answer}, {"feedback", feedback}}, true, "sr_generator");
          } else {
            std::tie(prompt, answer) = ask(TemplateName::sr_noc_generator,
                                           {{"candidates", answer}}, true, "sr_generator");
          }
        }
        break;
      }
    }
    if (answer.empty()) throw GenerationError("empty baseline answer for episode " + ep.id);
    rec.final_prompt = std::move(prompt);
    rec.final_answer = std::move(answer);
  } catch (const std::exception& e) {
    rec.status = RecordStatus::failed;
    rec.error = e.what();
  }
  rec.calls = log.snapshot();
  return rec;
}

// ---------------------------------------------------------------------------
// Batch execution

/// Runs `fn` over every episode with up to `workers` threads and hands the
/// records to `sink` strictly in dataset order. One failing episode never
/// stops the batch (fn records failures instead of throwing).
template <typename Fn, typename Sink>
void run_batch(const std::vector<Episode>& episodes, std::size_t workers, Fn&& fn,
               Sink&& sink) {
  workers = std::max<std::size_t>(1, std::min(workers, episodes.size()));
  std::mutex mu;
  std::map<std::size_t, EpisodeRecord> ready;
  std::size_t next_job = 0;
  std::size_t next_emit = 0;
  std::exception_ptr sink_error;

  auto worker = [&] {
    for (;;) {
      std::size_t job;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next_job >= episodes.size() || sink_error) return;
        job = next_job++;
      }
      EpisodeRecord rec = fn(episodes[job]);
      std::lock_guard<std::mutex> lock(mu);
      ready.emplace(job, std::move(rec));
      // Whoever holds the lock drains the in-order prefix.
      while (!sink_error) {
        auto it = ready.find(next_emit);
        if (it == ready.end()) break;
        try {
          sink(it->second);
        } catch (...) {
          sink_error = std::current_exception();
        }
        ready.erase(it);
        ++next_emit;
      }
    }
  };

  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < workers; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (sink_error) std::rethrow_exception(sink_error);
}

}  // namespace humorib

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

#include <algorithm>
#include <set>
#include <span>

#include "humorib/backends.hpp"
#include "humorib/prompts.hpp"

namespace humorib {

inline constexpr std::size_t kMaxDescriptions = 5;
inline constexpr std::size_t kMaxImplicationsPerCall = 3;

/// Everything a generation step needs besides its own inputs.
struct GenerationContext {
  Generator& generator;
  const TemplateLibrary& templates;
  const PipelineConfig& cfg;
  Tokenizer tokenizer = whitespace_token_count;
  CallLog* log = nullptr;

  GenerationRequest request(std::string prompt,
                            const std::optional<std::string>& image) const {
    GenerationRequest req;
    req.prompt = std::move(prompt);
    req.image = image;
    req.temperature = cfg.gen_temperature;
    req.max_output_tokens = cfg.max_output_tokens;
    req.seed = cfg.rng_seed;
    return req;
  }
};

inline std::optional<std::string> image_of(const Episode& ep) {
  if (ep.image.empty()) return std::nullopt;
  return ep.image;
}

// ---------------------------------------------------------------------------
// Parsing

/// Removes one leading list marker: "1." / "1)" / "-" / "*" / "•".
inline std::string_view strip_list_marker(std::string_view line) {
  line = trim_view(line);
  std::size_t i = 0;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')') &&
      (i + 1 == line.size() || is_space(line[i + 1]))) {
    return trim_view(line.substr(i + 1));
  }
  if (!line.empty() && (line[0] == '-' || line[0] == '*') &&
      (line.size() == 1 || is_space(line[1]))) {
    return trim_view(line.substr(1));
  }
  if (line.starts_with("\xE2\x80\xA2")) return trim_view(line.substr(3));
  return line;
}

/// Newline-separated list with enumeration markers stripped and empty
/// lines dropped.
inline std::vector<std::string> parse_numbered_list(std::string_view text) {
  std::vector<std::string> items;
  for (const auto& line : split_lines(text)) {
    auto item = strip_list_marker(line);
    if (!item.empty()) items.emplace_back(item);
  }
  return items;
}

/// Section labels such as "[Connections]:" that models echo back.
inline bool is_label_line(std::string_view line) {
  line = trim_view(line);
  if (line.empty() || line.front() != '[') return false;
  const auto close = line.find(']');
  if (close == std::string_view::npos) return false;
  auto rest = trim_view(line.substr(close + 1));
  return rest.empty() || rest == ":";
}

inline std::vector<std::string> parse_items(std::string_view text) {
  auto items = parse_numbered_list(text);
  std::erase_if(items, [](const std::string& s) { return is_label_line(s); });
  return items;
}

inline int count_sentences(std::string_view text) {
  int n = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if ((c == '.' || c == '!' || c == '?') &&
        (i + 1 == text.size() || is_space(text[i + 1])))
      ++n;
  }
  return std::clamp(n, 1, static_cast<int>(kMaxDescriptions));
}

// ---------------------------------------------------------------------------
// Prompt rendering

inline std::string format_lines(const std::vector<Description>& descriptions) {
  if (descriptions.empty()) return "None";
  std::string out;
  for (std::size_t i = 0; i < descriptions.size(); ++i) {
    if (i) out.push_back('\n');
    out += descriptions[i].text;
  }
  return out;
}

inline std::string format_numbered(const std::vector<std::string>& items) {
  if (items.empty()) return "None";
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out.push_back('\n');
    out += std::to_string(i + 1) + ". " + items[i];
  }
  return out;
}

inline std::vector<std::string> texts_of(std::span<const Implication> items) {
  std::vector<std::string> out;
  for (const auto& i : items) out.push_back(i.text);
  return out;
}

inline std::vector<std::string> texts_of(std::span<const CandidateExplanation> items) {
  std::vector<std::string> out;
  for (const auto& c : items) out.push_back(c.text);
  return out;
}

inline std::string render_description_prompt(const TemplateLibrary& lib) {
  return lib.render(TemplateName::description, {});
}

inline std::string render_seed_prompt(const TemplateLibrary& lib, const Episode& ep,
                                      const std::vector<Description>& window) {
  return lib.render(TemplateName::seed_implication,
                    {{"task_goal", lib.dataset_line("task_goal", ep.dataset)},
                     {"caption", ep.caption},
                     {"descriptions", format_lines(window)}});
}

inline std::string render_followup_prompt(const TemplateLibrary& lib,
                                          const Episode& ep,
                                          const std::vector<Description>& descriptions,
                                          const Implication& implication) {
  return lib.render(TemplateName::followup_implication,
                    {{"task_goal", lib.dataset_line("task_goal", ep.dataset)},
                     {"caption", ep.caption},
                     {"descriptions", format_lines(descriptions)},
                     {"implication", implication.text}});
}

/// Candidate prompt. With the image dropped it doubles as the text-only
/// context for cross-entropy scoring.
inline std::string render_candidate_prompt(const TemplateLibrary& lib,
                                           const Episode& ep,
                                           const std::vector<Description>& descriptions,
                                           const std::vector<std::string>& implications,
                                           const std::vector<std::string>& candidates) {
  return lib.render(TemplateName::candidate,
                    {{"image_kind", lib.dataset_line("image_kind", ep.dataset)},
                     {"caption", ep.caption},
                     {"descriptions", format_lines(descriptions)},
                     {"implications", format_numbered(implications)},
                     {"candidates", format_numbered(candidates)}});
}

inline std::string render_final_prompt(const TemplateLibrary& lib, const Episode& ep,
                                       const std::vector<std::string>& implications,
                                       const std::vector<std::string>& candidates) {
  return lib.render(TemplateName::final,
                    {{"image_kind", lib.dataset_line("image_kind", ep.dataset)},
                     {"caption", ep.caption},
                     {"implications", format_numbered(implications)},
                     {"candidates", format_numbered(candidates)}});
}

// ---------------------------------------------------------------------------
// Generation steps

inline std::vector<Description> generate_descriptions(const Episode& ep,
                                                      const GenerationContext& ctx) {
  if (ep.image.empty())
    throw InputError("episode " + ep.id + " has no image to describe");
  auto out = call_generator(ctx.generator,
                            ctx.request(render_description_prompt(ctx.templates),
                                        image_of(ep)),
                            "description", ctx.log);
  auto lines = parse_items(out.text);
  if (lines.empty())
    throw GenerationError("empty description output for episode " + ep.id);
  if (lines.size() > kMaxDescriptions) lines.resize(kMaxDescriptions);
  std::vector<Description> descriptions;
  for (auto& l : lines) {
    const int n = count_sentences(l);
    descriptions.push_back({std::move(l), n});
  }
  return descriptions;
}

/// Number of sliding windows of `window` consecutive descriptions, stride 1.
inline std::size_t description_window_count(std::size_t descriptions,
                                            std::size_t window) {
  if (descriptions == 0) return 0;
  return descriptions <= window ? 1 : descriptions - window + 1;
}

inline void append_unique(std::vector<Implication>& into, std::set<std::string>& seen,
                          std::vector<std::string> texts, int hop) {
  if (texts.size() > kMaxImplicationsPerCall) texts.resize(kMaxImplicationsPerCall);
  for (auto& t : texts) {
    if (!seen.insert(t).second) continue;
    Implication p;
    p.text = std::move(t);
    p.hop_born = hop;
    into.push_back(std::move(p));
  }
}

inline std::vector<Implication> generate_seed_implications(
    const Episode& ep, const std::vector<Description>& descriptions,
    const GenerationContext& ctx) {
  if (descriptions.empty()) throw InputError("seed implications need descriptions");
  const auto window = static_cast<std::size_t>(ctx.cfg.description_window);
  const std::size_t windows = description_window_count(descriptions.size(), window);
  std::vector<Implication> result;
  std::set<std::string> seen;
  std::size_t failed = 0;
  std::string last_error;
  for (std::size_t w = 0; w < windows; ++w) {
    const auto end = std::min(descriptions.size(), w + window);
    std::vector<Description> slice(descriptions.begin() + static_cast<std::ptrdiff_t>(w),
                                   descriptions.begin() + static_cast<std::ptrdiff_t>(end));
    try {
      auto out = call_generator(ctx.generator,
                                ctx.request(render_seed_prompt(ctx.templates, ep, slice),
                                            image_of(ep)),
                                "seed_implication", ctx.log);
      append_unique(result, seen, parse_items(out.text), 1);
    } catch (const BackendError& e) {
      ++failed;
      last_error = e.what();
      log_warning("seed window " + std::to_string(w) + " failed for episode " +
                  ep.id + ": " + e.what());
    }
  }
  if (failed == windows)
    throw GenerationError("all seed-implication windows failed for episode " +
                          ep.id + ": " + last_error);
  return result;
}

/// Up to three new implications building on one previously selected
/// implication, tagged with `hop`.
inline std::vector<Implication> generate_followup_implications(
    const Episode& ep, const std::vector<Description>& descriptions,
    const Implication& implication, int hop, const GenerationContext& ctx) {
  if (hop < 2) throw InputError("follow-up implications start at hop 2");
  auto out = call_generator(
      ctx.generator,
      ctx.request(render_followup_prompt(ctx.templates, ep, descriptions, implication),
                  image_of(ep)),
      "followup_implication", ctx.log);
  std::vector<Implication> result;
  std::set<std::string> seen;
  append_unique(result, seen, parse_items(out.text), hop);
  return result;
}

/// One candidate explanation; nullopt when the generator returned nothing.
inline std::optional<CandidateExplanation> generate_candidate(
    const Episode& ep, const std::vector<Description>& descriptions,
    const std::vector<Implication>& implications,
    const std::vector<CandidateExplanation>& prior_candidates, int hop,
    const GenerationContext& ctx) {
  const auto prompt = render_candidate_prompt(ctx.templates, ep, descriptions,
                                              texts_of(implications),
                                              texts_of(prior_candidates));
  auto out = call_generator(ctx.generator, ctx.request(prompt, image_of(ep)),
                            "candidate", ctx.log);
  auto text = trim(out.text);
  const std::size_t tokens = ctx.tokenizer(text);
  if (text.empty() || tokens == 0) {
    log_warning("empty candidate dropped for episode " + ep.id);
    return std::nullopt;
  }
  CandidateExplanation c;
  c.text = std::move(text);
  c.hop_born = hop;
  c.token_length = tokens;
  return c;
}

struct FinalAnswer {
  std::string prompt;
  std::string text;
};

/// Final explanation from the selected implications and retained candidates.
/// Descriptions are deliberately absent from this prompt.
inline FinalAnswer generate_final_answer(const Episode& ep,
                                         const std::vector<Implication>& top_implications,
                                         const std::vector<CandidateExplanation>& top_candidates,
                                         const GenerationContext& ctx) {
  FinalAnswer ans;
  ans.prompt = render_final_prompt(ctx.templates, ep, texts_of(top_implications),
                                   texts_of(top_candidates));
  auto out = call_generator(ctx.generator, ctx.request(ans.prompt, image_of(ep)),
                            "final", ctx.log);
  ans.text = trim(out.text);
  if (ans.text.empty())
    throw GenerationError("empty final answer for episode " + ep.id);
  return ans;
}

}  // namespace humorib

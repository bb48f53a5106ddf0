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

// Judge-based precision / recall over atomic facts.
//
// recall    = share of reference atoms the judge finds conveyed in the prediction
// precision = share of prediction atoms the judge finds inferable from the
//             reference text, with the image-description atoms appended
// f1        = harmonic mean, 0 when both are 0

#include <cmath>
#include <map>
#include <numeric>

#include "humorib/generation.hpp"
#include "humorib/record.hpp"

namespace humorib {

struct JudgeContext {
  Generator& judge;
  const TemplateLibrary& templates;
  const PipelineConfig& cfg;
  CallLog* log = nullptr;

  std::string ask(std::string prompt, std::string_view role) const {
    GenerationRequest req;
    req.prompt = std::move(prompt);
    req.temperature = cfg.eval_temperature;
    req.max_output_tokens = cfg.max_output_tokens;
    req.seed = cfg.rng_seed;
    return call_generator(judge, req, role, log).text;
  }
};

inline std::vector<AtomicFact> decompose_atoms(std::string_view text, AtomSource source,
                                               const JudgeContext& ctx) {
  if (trim_view(text).empty()) throw InputError("cannot decompose an empty text");
  const auto out = ctx.ask(
      ctx.templates.render(TemplateName::decompose, {{"text", std::string(text)}}),
      "decompose");
  std::vector<AtomicFact> atoms;
  for (auto& item : parse_items(out)) atoms.push_back({std::move(item), source});
  return atoms;
}

/// true / false for a leading Yes / No (case, punctuation and markdown
/// ignored); nullopt for anything else.
inline std::optional<bool> parse_verdict(std::string_view output) {
  std::size_t i = 0;
  while (i < output.size() &&
         !std::isalpha(static_cast<unsigned char>(output[i])))
    ++i;
  std::string word;
  while (i < output.size() && std::isalpha(static_cast<unsigned char>(output[i]))) {
    word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(output[i]))));
    ++i;
  }
  if (word == "yes") return true;
  if (word == "no") return false;
  return std::nullopt;
}

inline bool verify_atom(std::string_view atom, std::string_view against,
                        VerifyDirection direction, const JudgeContext& ctx) {
  if (trim_view(atom).empty() || trim_view(against).empty())
    throw InputError("verification needs two non-empty texts");
  const auto name = direction == VerifyDirection::recall ? TemplateName::verify_recall
                                                         : TemplateName::verify_precision;
  const auto out = ctx.ask(ctx.templates.render(name, {{"sentence1", std::string(atom)},
                                                       {"sentence2", std::string(against)}}),
                           direction == VerifyDirection::recall ? "verify_recall"
                                                                : "verify_precision");
  const auto verdict = parse_verdict(out);
  if (!verdict) {
    log_warning("judge answered neither Yes nor No (\"" + trim(out).substr(0, 40) +
                "\"); counted as No");
    return false;
  }
  return *verdict;
}

/// Scores one prediction. nullopt when the prediction or every reference
/// decomposes to nothing (the instance is unscorable).
inline std::optional<InstanceScore> score_instance(std::string_view id,
                                                   std::string_view prediction,
                                                   const std::vector<std::string>& references,
                                                   const std::vector<Description>& descriptions,
                                                   const JudgeContext& ctx) {
  if (references.empty()) throw InputError("scoring needs at least one reference");
  InstanceScore score;
  score.id = std::string(id);
  if (trim_view(prediction).empty()) return std::nullopt;

  const auto pred_atoms = decompose_atoms(prediction, AtomSource::prediction, ctx);
  if (pred_atoms.empty()) return std::nullopt;

  std::vector<double> recalls;
  for (const auto& ref : references) {
    if (trim_view(ref).empty()) continue;
    const auto ref_atoms = decompose_atoms(ref, AtomSource::reference, ctx);
    if (ref_atoms.empty()) continue;
    std::size_t hit = 0;
    for (const auto& a : ref_atoms) {
      const bool ok = verify_atom(a.text, prediction, VerifyDirection::recall, ctx);
      hit += ok;
      score.atom_verdicts.push_back({a.text, ok, VerifyDirection::recall});
    }
    recalls.push_back(static_cast<double>(hit) / static_cast<double>(ref_atoms.size()));
  }
  if (recalls.empty()) return std::nullopt;
  score.recall = ctx.cfg.multi_ref == MultiRef::max
                     ? *std::max_element(recalls.begin(), recalls.end())
                     : std::accumulate(recalls.begin(), recalls.end(), 0.0) /
                           static_cast<double>(recalls.size());

  // Precision reference: all references, then the description atoms.
  std::string augmented = join(references, "\n");
  if (!descriptions.empty()) {
    for (const auto& a : decompose_atoms(format_lines(descriptions),
                                         AtomSource::description, ctx)) {
      augmented += "\n" + a.text;
    }
  }
  std::size_t hit = 0;
  for (const auto& a : pred_atoms) {
    const bool ok = verify_atom(a.text, augmented, VerifyDirection::precision, ctx);
    hit += ok;
    score.atom_verdicts.push_back({a.text, ok, VerifyDirection::precision});
  }
  score.precision = static_cast<double>(hit) / static_cast<double>(pred_atoms.size());
  score.f1 = f1_score(score.precision, score.recall);
  return score;
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1); 0 for fewer than two values.
inline double sample_stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// Per-split means (macro-F1 = mean of per-instance F1), then mean and
/// sample standard deviation across splits. Splits keep first-seen order.
inline EvalReport aggregate(std::vector<InstanceScore> instances, std::size_t unscorable = 0) {
  if (instances.empty()) throw InputError("aggregate needs at least one scored instance");
  EvalReport report;
  std::vector<std::string> order;
  std::map<std::string, std::vector<const InstanceScore*>> groups;
  for (const auto& s : instances) {
    if (!groups.count(s.split)) order.push_back(s.split);
    groups[s.split].push_back(&s);
  }
  std::vector<double> ps, rs, f1s;
  for (const auto& name : order) {
    std::vector<double> p, r, f;
    for (const auto* s : groups[name]) {
      p.push_back(s->precision);
      r.push_back(s->recall);
      f.push_back(s->f1);
    }
    SplitSummary sum;
    sum.split = name;
    sum.instances = p.size();
    sum.mean_precision = mean_of(p);
    sum.mean_recall = mean_of(r);
    sum.macro_f1 = mean_of(f);
    sum.f1_of_means = f1_score(sum.mean_precision, sum.mean_recall);
    ps.push_back(sum.mean_precision);
    rs.push_back(sum.mean_recall);
    f1s.push_back(sum.macro_f1);
    report.per_split.push_back(std::move(sum));
  }
  auto& agg = report.aggregate;
  agg.mean_precision = mean_of(ps);
  agg.mean_recall = mean_of(rs);
  agg.macro_f1 = mean_of(f1s);
  agg.f1_of_means = f1_score(agg.mean_precision, agg.mean_recall);
  agg.stddev_precision = sample_stddev(ps);
  agg.stddev_recall = sample_stddev(rs);
  agg.stddev_macro_f1 = sample_stddev(f1s);
  agg.splits = order.size();
  agg.unscorable = unscorable;
  report.per_instance = std::move(instances);
  return report;
}

/// Best-candidate precision / recall / F1 for every hop of a pipeline
/// record (the candidate with the highest F1 wins).
inline std::vector<HopMetric> hop_metrics(const EpisodeRecord& rec,
                                          const std::vector<std::string>& references,
                                          const JudgeContext& ctx) {
  std::vector<HopMetric> out;
  for (const auto& state : rec.hop_states) {
    std::optional<HopMetric> best;
    for (const auto& c : state.candidates) {
      auto s = score_instance(rec.episode_id, c.text, references, state.descriptions, ctx);
      if (!s) continue;
      if (!best || s->f1 > best->f1) best = HopMetric{state.hop, s->precision, s->recall, s->f1};
    }
    if (best) out.push_back(*best);
  }
  return out;
}

/// Scores a batch of records against `references` (keyed by episode id).
/// Each record's split is its sampling seed. Failed records, records with an
/// empty answer and records without references count as unscorable. With
/// `per_hop`, pipeline records also get per-hop metrics attached.
struct RecordEvaluation {
  EvalReport report;
  std::vector<EpisodeRecord> annotated;
};

inline std::string split_name(const EpisodeRecord& rec) {
  return "seed=" + std::to_string(rec.config.rng_seed);
}

inline RecordEvaluation evaluate_records(
    std::vector<EpisodeRecord> records,
    const std::map<std::string, std::vector<std::string>>& references,
    const JudgeContext& ctx, bool per_hop = false) {
  RecordEvaluation out;
  std::vector<InstanceScore> scores;
  std::size_t unscorable = 0;
  for (auto& rec : records) {
    const auto it = references.find(rec.episode_id);
    if (it == references.end() || it->second.empty()) {
      log_warning("no references for episode " + rec.episode_id);
      ++unscorable;
      out.annotated.push_back(std::move(rec));
      continue;
    }
    std::vector<Description> descriptions;
    if (!rec.hop_states.empty()) descriptions = rec.hop_states.front().descriptions;
    std::optional<InstanceScore> s;
    if (rec.status != RecordStatus::failed) {
      s = score_instance(rec.episode_id, rec.final_answer, it->second, descriptions, ctx);
    }
    if (s) {
      s->split = split_name(rec);
      scores.push_back(std::move(*s));
    } else {
      ++unscorable;
    }
    if (per_hop && !rec.hop_states.empty()) rec.hop_metrics = hop_metrics(rec, it->second, ctx);
    out.annotated.push_back(std::move(rec));
  }
  if (scores.empty()) throw InputError("no record could be scored");
  out.report = aggregate(std::move(scores), unscorable);
  return out;
}

}  // namespace humorib

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

// JSON mapping for the domain and record types. Non-finite doubles (failed
// scores are +inf) are written as the strings "inf", "-inf" and "nan" since
// JSON has no literal for them.

#include <nlohmann/json.hpp>

#include "humorib/record.hpp"
#include "humorib/types.hpp"

namespace humorib {

using nlohmann::json;

namespace json_detail {

inline json number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double to_number(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw InputError("expected a number, got \"" + s + "\"");
  }
  return j.get<double>();
}

inline json opt_number(const std::optional<double>& v) {
  return v ? number(*v) : json(nullptr);
}

inline std::optional<double> to_opt_number(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return to_number(j.at(key));
}

template <typename T>
T value_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

}  // namespace json_detail

// Enums -------------------------------------------------------------------

inline void to_json(json& j, Dataset d) { j = std::string(to_string(d)); }
inline void from_json(const json& j, Dataset& d) { d = parse_dataset(j.get<std::string>()); }

inline void to_json(json& j, RecordStatus s) { j = std::string(to_string(s)); }
inline void from_json(const json& j, RecordStatus& s) { s = parse_status(j.get<std::string>()); }

NLOHMANN_JSON_SERIALIZE_ENUM(CeReduction, {{CeReduction::mean, "mean"},
                                           {CeReduction::sum, "sum"}})
NLOHMANN_JSON_SERIALIZE_ENUM(MultiRef, {{MultiRef::max, "max"}, {MultiRef::mean, "mean"}})
NLOHMANN_JSON_SERIALIZE_ENUM(AtomSource, {{AtomSource::reference, "reference"},
                                          {AtomSource::prediction, "prediction"},
                                          {AtomSource::description, "description"}})
NLOHMANN_JSON_SERIALIZE_ENUM(VerifyDirection, {{VerifyDirection::recall, "recall"},
                                               {VerifyDirection::precision, "precision"}})

// Domain types -------------------------------------------------------------

inline void to_json(json& j, const Episode& e) {
  j = json{{"id", e.id},
           {"image_path", e.image},
           {"caption", e.caption},
           {"dataset", e.dataset},
           {"references", e.references}};
}

inline void from_json(const json& j, Episode& e) {
  e.id = j.at("id").get<std::string>();
  e.image = json_detail::value_or<std::string>(j, "image_path", "");
  e.caption = j.at("caption").get<std::string>();
  e.dataset = j.at("dataset").get<Dataset>();
  e.references = json_detail::value_or<std::vector<std::string>>(j, "references", {});
}

inline void to_json(json& j, const Description& d) {
  j = json{{"text", d.text}, {"sentence_count", d.sentence_count}};
}

inline void from_json(const json& j, Description& d) {
  d.text = j.at("text").get<std::string>();
  d.sentence_count = j.at("sentence_count").get<int>();
}

inline void to_json(json& j, const Implication& p) {
  using json_detail::opt_number;
  j = json{{"text", p.text},
           {"hop_born", p.hop_born},
           {"compression_score", opt_number(p.compression_score)},
           {"relevance_score", opt_number(p.relevance_score)},
           {"combined_score", opt_number(p.combined_score)}};
  if (p.embedding) j["embedding"] = *p.embedding;
}

inline void from_json(const json& j, Implication& p) {
  using json_detail::to_opt_number;
  p.text = j.at("text").get<std::string>();
  p.hop_born = j.at("hop_born").get<int>();
  p.embedding = std::nullopt;
  if (j.contains("embedding") && !j.at("embedding").is_null())
    p.embedding = j.at("embedding").get<Embedding>();
  p.compression_score = to_opt_number(j, "compression_score");
  p.relevance_score = to_opt_number(j, "relevance_score");
  p.combined_score = to_opt_number(j, "combined_score");
}

inline void to_json(json& j, const CandidateExplanation& c) {
  using json_detail::opt_number;
  j = json{{"text", c.text},
           {"hop_born", c.hop_born},
           {"token_length", c.token_length},
           {"cross_entropy", opt_number(c.cross_entropy)},
           {"length_penalty", opt_number(c.length_penalty)}};
}

inline void from_json(const json& j, CandidateExplanation& c) {
  using json_detail::to_opt_number;
  c.text = j.at("text").get<std::string>();
  c.hop_born = j.at("hop_born").get<int>();
  c.token_length = j.at("token_length").get<std::size_t>();
  c.cross_entropy = to_opt_number(j, "cross_entropy");
  c.length_penalty = to_opt_number(j, "length_penalty");
}

inline void to_json(json& j, const HopState& h) {
  j = json{{"hop", h.hop},
           {"descriptions", h.descriptions},
           {"implication_pool", h.implication_pool},
           {"selected_implications", h.selected_implications},
           {"candidates", h.candidates}};
}

inline void from_json(const json& j, HopState& h) {
  h.hop = j.at("hop").get<int>();
  h.descriptions = j.at("descriptions").get<std::vector<Description>>();
  h.implication_pool = j.at("implication_pool").get<std::vector<Implication>>();
  h.selected_implications = j.at("selected_implications").get<std::vector<Implication>>();
  h.candidates = j.at("candidates").get<std::vector<CandidateExplanation>>();
}

inline void to_json(json& j, const PipelineConfig& c) {
  j = json{{"alpha", c.alpha},
           {"hops", c.hops},
           {"k", c.k},
           {"max_pool", c.max_pool},
           {"gen_temperature", c.gen_temperature},
           {"eval_temperature", c.eval_temperature},
           {"description_window", c.description_window},
           {"rng_seed", c.rng_seed},
           {"max_output_tokens", c.max_output_tokens},
           {"ce_reduction", c.ce_reduction},
           {"multi_ref", c.multi_ref},
           {"store_embeddings", c.store_embeddings}};
}

inline void from_json(const json& j, PipelineConfig& c) {
  using json_detail::value_or;
  const PipelineConfig d;
  c.alpha = value_or(j, "alpha", d.alpha);
  c.hops = value_or(j, "hops", d.hops);
  c.k = value_or(j, "k", d.k);
  c.max_pool = value_or(j, "max_pool", d.max_pool);
  c.gen_temperature = value_or(j, "gen_temperature", d.gen_temperature);
  c.eval_temperature = value_or(j, "eval_temperature", d.eval_temperature);
  c.description_window = value_or(j, "description_window", d.description_window);
  c.rng_seed = value_or(j, "rng_seed", d.rng_seed);
  c.max_output_tokens = value_or(j, "max_output_tokens", d.max_output_tokens);
  c.ce_reduction = value_or(j, "ce_reduction", d.ce_reduction);
  c.multi_ref = value_or(j, "multi_ref", d.multi_ref);
  c.store_embeddings = value_or(j, "store_embeddings", d.store_embeddings);
}

inline void to_json(json& j, const CallRecord& c) {
  j = json{{"role", c.role}, {"prompt_hash", c.prompt_hash}, {"latency_ms", c.latency_ms}};
}

inline void from_json(const json& j, CallRecord& c) {
  c.role = j.at("role").get<std::string>();
  c.prompt_hash = j.at("prompt_hash").get<std::string>();
  c.latency_ms = j.at("latency_ms").get<double>();
}

inline void to_json(json& j, const HopMetric& m) {
  j = json{{"hop", m.hop}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

inline void from_json(const json& j, HopMetric& m) {
  m.hop = j.at("hop").get<int>();
  m.precision = j.at("precision").get<double>();
  m.recall = j.at("recall").get<double>();
  m.f1 = j.at("f1").get<double>();
}

inline void to_json(json& j, const EpisodeRecord& r) {
  j = json{{"schema_version", r.schema_version},
           {"episode_id", r.episode_id},
           {"image_path", r.image},
           {"caption", r.caption},
           {"dataset", r.dataset},
           {"mode", r.mode},
           {"config", r.config},
           {"hop_states", r.hop_states},
           {"final_prompt", r.final_prompt},
           {"final_answer", r.final_answer},
           {"hop_metrics", r.hop_metrics},
           {"calls", r.calls},
           {"flags", r.flags},
           {"status", r.status},
           {"error", r.error}};
}

inline void from_json(const json& j, EpisodeRecord& r) {
  using json_detail::value_or;
  r.schema_version = j.at("schema_version").get<int>();
  if (r.schema_version != kRecordSchemaVersion)
    throw InputError("unsupported record schema_version " +
                     std::to_string(r.schema_version));
  r.episode_id = j.at("episode_id").get<std::string>();
  r.image = value_or<std::string>(j, "image_path", "");
  r.caption = j.at("caption").get<std::string>();
  r.dataset = j.at("dataset").get<Dataset>();
  r.mode = j.at("mode").get<std::string>();
  r.config = j.at("config").get<PipelineConfig>();
  r.hop_states = j.at("hop_states").get<std::vector<HopState>>();
  r.final_prompt = value_or<std::string>(j, "final_prompt", "");
  r.final_answer = value_or<std::string>(j, "final_answer", "");
  r.hop_metrics = value_or<std::vector<HopMetric>>(j, "hop_metrics", {});
  r.calls = value_or<std::vector<CallRecord>>(j, "calls", {});
  r.flags = value_or<std::vector<std::string>>(j, "flags", {});
  r.status = j.at("status").get<RecordStatus>();
  r.error = value_or<std::string>(j, "error", "");
}

// Evaluation / attribution ---------------------------------------------------

inline void to_json(json& j, const AtomVerdict& v) {
  j = json{{"atom", v.atom}, {"verified", v.verified}, {"direction", v.direction}};
}

inline void from_json(const json& j, AtomVerdict& v) {
  v.atom = j.at("atom").get<std::string>();
  v.verified = j.at("verified").get<bool>();
  v.direction = j.at("direction").get<VerifyDirection>();
}

inline void to_json(json& j, const InstanceScore& s) {
  j = json{{"id", s.id},
           {"split", s.split},
           {"precision", s.precision},
           {"recall", s.recall},
           {"f1", s.f1},
           {"atom_verdicts", s.atom_verdicts}};
}

inline void from_json(const json& j, InstanceScore& s) {
  s.id = j.at("id").get<std::string>();
  s.split = json_detail::value_or<std::string>(j, "split", "");
  s.precision = j.at("precision").get<double>();
  s.recall = j.at("recall").get<double>();
  s.f1 = j.at("f1").get<double>();
  s.atom_verdicts = json_detail::value_or<std::vector<AtomVerdict>>(j, "atom_verdicts", {});
}

inline void to_json(json& j, const SplitSummary& s) {
  j = json{{"split", s.split},
           {"instances", s.instances},
           {"mean_P", s.mean_precision},
           {"mean_R", s.mean_recall},
           {"macro_F1", s.macro_f1},
           {"F1_of_means", s.f1_of_means}};
}

inline void to_json(json& j, const EvalAggregate& a) {
  j = json{{"mean_P", a.mean_precision},
           {"mean_R", a.mean_recall},
           {"macro_F1", a.macro_f1},
           {"F1_of_means", a.f1_of_means},
           {"stddev_P", a.stddev_precision},
           {"stddev_R", a.stddev_recall},
           {"stddev_macro_F1", a.stddev_macro_f1},
           {"splits", a.splits},
           {"unscorable", a.unscorable}};
}

inline void to_json(json& j, const EvalReport& r) {
  j = json{{"per_instance", r.per_instance},
           {"per_split", r.per_split},
           {"aggregate", r.aggregate}};
}

inline void to_json(json& j, const AttributionReport& r) {
  json phi = json::array();
  for (const auto& v : r.phi) phi.push_back(json_detail::opt_number(v));
  j = json{{"sentences", r.sentences},
           {"base_response", r.base_response},
           {"phi", phi},
           {"samples_used", r.samples_used},
           {"ratio", r.ratio},
           {"exact", r.exact}};
}

inline void from_json(const json& j, AttributionReport& r) {
  r.sentences = j.at("sentences").get<std::vector<std::string>>();
  r.base_response = j.at("base_response").get<std::string>();
  r.phi.clear();
  for (const auto& v : j.at("phi")) {
    r.phi.push_back(v.is_null() ? std::nullopt
                                : std::optional<double>(json_detail::to_number(v)));
  }
  r.samples_used = j.at("samples_used").get<std::size_t>();
  r.ratio = j.at("ratio").get<double>();
  r.exact = j.at("exact").get<bool>();
}

}  // namespace humorib

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

#include "humorib/backends.hpp"
#include "humorib/types.hpp"

namespace humorib {

inline constexpr int kRecordSchemaVersion = 1;

enum class RecordStatus { ok, partial, failed };

inline std::string_view to_string(RecordStatus s) {
  switch (s) {
    case RecordStatus::ok: return "ok";
    case RecordStatus::partial: return "partial";
    case RecordStatus::failed: return "failed";
  }
  return "failed";
}

inline RecordStatus parse_status(std::string_view s) {
  if (s == "ok") return RecordStatus::ok;
  if (s == "partial") return RecordStatus::partial;
  if (s == "failed") return RecordStatus::failed;
  throw InputError("unknown record status: " + std::string(s));
}

/// Best-candidate precision/recall/F1 of one hop, filled in by `eval`.
struct HopMetric {
  int hop = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  bool operator==(const HopMetric&) const = default;
};

/// Everything one episode run produced. Pipeline runs ("ib") carry one
/// HopState per hop 0..H; baseline runs carry none.
struct EpisodeRecord {
  int schema_version = kRecordSchemaVersion;
  std::string episode_id;
  std::string image;
  std::string caption;
  Dataset dataset = Dataset::newyorker;
  std::string mode;  // "ib", "zs", "cot", "sr", "sr_noc"
  PipelineConfig config;
  std::vector<HopState> hop_states;
  std::string final_prompt;
  std::string final_answer;
  std::vector<HopMetric> hop_metrics;
  std::vector<CallRecord> calls;
  std::vector<std::string> flags;
  RecordStatus status = RecordStatus::ok;
  std::string error;

  bool operator==(const EpisodeRecord&) const = default;
};

}  // namespace humorib

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

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "humorib/types.hpp"

#ifndef HUMORIB_PROMPT_DIR
#define HUMORIB_PROMPT_DIR "prompts"
#endif

namespace humorib {

enum class TemplateName {
  description,
  seed_implication,
  followup_implication,
  candidate,
  final,
  zs,
  cot,
  sr_generator,
  sr_noc_generator,
  sr_critic,
  decompose,
  verify_recall,
  verify_precision,
};

inline constexpr std::array kAllTemplates = {
    TemplateName::description,      TemplateName::seed_implication,
    TemplateName::followup_implication, TemplateName::candidate,
    TemplateName::final,            TemplateName::zs,
    TemplateName::cot,              TemplateName::sr_generator,
    TemplateName::sr_noc_generator, TemplateName::sr_critic,
    TemplateName::decompose,        TemplateName::verify_recall,
    TemplateName::verify_precision,
};

inline std::string_view to_string(TemplateName n) {
  switch (n) {
    case TemplateName::description: return "description";
    case TemplateName::seed_implication: return "seed_implication";
    case TemplateName::followup_implication: return "followup_implication";
    case TemplateName::candidate: return "candidate";
    case TemplateName::final: return "final";
    case TemplateName::zs: return "zs";
    case TemplateName::cot: return "cot";
    case TemplateName::sr_generator: return "sr_generator";
    case TemplateName::sr_noc_generator: return "sr_noc_generator";
    case TemplateName::sr_critic: return "sr_critic";
    case TemplateName::decompose: return "decompose";
    case TemplateName::verify_recall: return "verify_recall";
    case TemplateName::verify_precision: return "verify_precision";
  }
  return "";
}

using PlaceholderMap = std::map<std::string, std::string, std::less<>>;

/// Substitutes `{name}` placeholders; `{{` and `}}` render as literal braces.
/// Every placeholder in `body` must be present in `values`.
inline std::string render_template(std::string_view body,
                                   const PlaceholderMap& values) {
  std::string out;
  out.reserve(body.size() * 2);
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    if (c == '{') {
      if (i + 1 < body.size() && body[i + 1] == '{') {
        out.push_back('{');
        ++i;
        continue;
      }
      const auto close = body.find('}', i + 1);
      if (close == std::string_view::npos)
        throw InputError("unterminated placeholder in template");
      const std::string_view name = body.substr(i + 1, close - i - 1);
      auto it = values.find(name);
      if (it == values.end())
        throw InputError("unresolved placeholder {" + std::string(name) + "}");
      out.append(it->second);
      i = close;
    } else if (c == '}' && i + 1 < body.size() && body[i + 1] == '}') {
      out.push_back('}');
      ++i;
    } else {
      out.push_back(c);
    }
  }
  return out;
}

struct PromptTemplate {
  TemplateName name = TemplateName::description;
  std::string body;

  std::string render(const PlaceholderMap& values) const {
    return render_template(body, values);
  }
};

/// Template assets loaded from a directory of `<name>.txt` files plus
/// `dataset_goals.json` with the per-dataset lines.
class TemplateLibrary {
 public:
  static TemplateLibrary load(const std::filesystem::path& dir = HUMORIB_PROMPT_DIR) {
    TemplateLibrary lib;
    for (TemplateName n : kAllTemplates) {
      const auto path = dir / (std::string(to_string(n)) + ".txt");
      lib.templates_[static_cast<std::size_t>(n)] = {n, read_file(path)};
    }
    const auto goals_path = dir / "dataset_goals.json";
    nlohmann::json goals;
    try {
      goals = nlohmann::json::parse(read_file(goals_path));
    } catch (const nlohmann::json::exception& e) {
      throw InputError("invalid " + goals_path.string() + ": " + e.what());
    }
    for (const char* key : {"task_goal", "critic_goal", "image_kind"}) {
      for (Dataset d : {Dataset::memecap, Dataset::newyorker, Dataset::yesbut}) {
        const auto ds = std::string(to_string(d));
        if (!goals.contains(key) || !goals[key].contains(ds))
          throw InputError(goals_path.string() + " lacks " + key + "." + ds);
        lib.goals_[key][ds] = goals[key][ds].get<std::string>();
      }
    }
    return lib;
  }

  const PromptTemplate& get(TemplateName n) const {
    return templates_[static_cast<std::size_t>(n)];
  }

  std::string render(TemplateName n, const PlaceholderMap& values) const {
    return get(n).render(values);
  }

  /// Per-dataset line; `kind` is one of task_goal, critic_goal, image_kind.
  const std::string& dataset_line(std::string_view kind, Dataset d) const {
    auto it = goals_.find(std::string(kind));
    if (it == goals_.end()) throw InputError("unknown dataset line " + std::string(kind));
    return it->second.at(std::string(to_string(d)));
  }

 private:
  static std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read template asset " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  std::array<PromptTemplate, kAllTemplates.size()> templates_{};
  std::map<std::string, std::map<std::string, std::string>> goals_;
};

}  // namespace humorib

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

// Backend configuration files and the factory that turns them into models.
//
//   {"kind": "http", "endpoint_url": "...", "model_id": "...",
//    "auth_env_var": "OPENAI_API_KEY", ...}
//
// Credentials are never read from the file, only from the named variable.

#include <set>

#include "humorib/http.hpp"
#include "humorib/io.hpp"
#include "humorib/mock.hpp"

namespace humorib {

enum class BackendKind { mock, http };

struct BackendConfig {
  BackendKind kind = BackendKind::mock;
  std::string endpoint_url;
  std::string model_id;
  std::string auth_env_var;
  std::string embed_model_id = "BAAI/bge-large-en-v1.5";
  std::string scorer_model_id = "Qwen/Qwen2-1.5B";
  std::string judge_model_id;       // empty: same as model_id
  std::string embed_endpoint_url;   // empty: derived from endpoint_url
  std::string scorer_endpoint_url;  // empty: derived from endpoint_url
  std::string embed_auth_env_var;   // empty: same as auth_env_var
  std::string scorer_auth_env_var;  // empty: same as auth_env_var
  std::string response_path = "/choices/0/message/content";
  double timeout_s = 60.0;
  int max_attempts = 3;
  double backoff_ms = 500.0;
  std::size_t mock_embed_dim = 256;

  void validate() const {
    if (kind == BackendKind::http && (endpoint_url.empty() || model_id.empty()))
      throw InputError("http backend needs endpoint_url and model_id");
    if (max_attempts < 1) throw InputError("max_attempts must be >= 1");
    if (timeout_s <= 0.0) throw InputError("timeout_s must be > 0");
    if (backoff_ms < 0.0) throw InputError("backoff_ms must be >= 0");
    if (mock_embed_dim == 0) throw InputError("mock_embed_dim must be >= 1");
  }
};

NLOHMANN_JSON_SERIALIZE_ENUM(BackendKind, {{BackendKind::mock, "mock"}, {BackendKind::http, "http"}})

inline void from_json(const nlohmann::json& j, BackendConfig& c) {
  using json_detail::value_or;
  const BackendConfig d;
  static const std::set<std::string> known{
      "kind", "endpoint_url", "model_id", "auth_env_var", "embed_model_id",
      "scorer_model_id", "judge_model_id", "embed_endpoint_url", "scorer_endpoint_url",
      "embed_auth_env_var", "scorer_auth_env_var", "response_path", "timeout_s",
      "max_attempts", "backoff_ms", "mock_embed_dim"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw InputError("unknown backend config key: " + key);
  }
  c.kind = j.at("kind").get<BackendKind>();
  c.endpoint_url = value_or<std::string>(j, "endpoint_url", d.endpoint_url);
  c.model_id = value_or<std::string>(j, "model_id", d.model_id);
  c.auth_env_var = value_or<std::string>(j, "auth_env_var", d.auth_env_var);
  c.embed_model_id = value_or<std::string>(j, "embed_model_id", d.embed_model_id);
  c.scorer_model_id = value_or<std::string>(j, "scorer_model_id", d.scorer_model_id);
  c.judge_model_id = value_or<std::string>(j, "judge_model_id", d.judge_model_id);
  c.embed_endpoint_url = value_or<std::string>(j, "embed_endpoint_url", d.embed_endpoint_url);
  c.scorer_endpoint_url = value_or<std::string>(j, "scorer_endpoint_url", d.scorer_endpoint_url);
  c.embed_auth_env_var = value_or<std::string>(j, "embed_auth_env_var", d.embed_auth_env_var);
  c.scorer_auth_env_var = value_or<std::string>(j, "scorer_auth_env_var", d.scorer_auth_env_var);
  c.response_path = value_or<std::string>(j, "response_path", d.response_path);
  c.timeout_s = value_or<double>(j, "timeout_s", d.timeout_s);
  c.max_attempts = value_or<int>(j, "max_attempts", d.max_attempts);
  c.backoff_ms = value_or<double>(j, "backoff_ms", d.backoff_ms);
  c.mock_embed_dim = value_or<std::size_t>(j, "mock_embed_dim", d.mock_embed_dim);
  c.validate();
}

inline BackendConfig load_backend_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open backend config " + path.string());
  try {
    return nlohmann::json::parse(in).get<BackendConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

/// Replaces a trailing "/chat/completions" with `suffix`.
inline std::string sibling_endpoint(const std::string& chat_url, std::string_view suffix) {
  constexpr std::string_view chat = "/chat/completions";
  if (chat_url.size() >= chat.size() &&
      chat_url.compare(chat_url.size() - chat.size(), chat.size(), chat) == 0)
    return chat_url.substr(0, chat_url.size() - chat.size()) + std::string(suffix);
  throw InputError("cannot derive a " + std::string(suffix) + " endpoint from " + chat_url +
                   "; set it explicitly");
}

/// Builds all four model handles. With a cache, generator and judge calls
/// go through the response cache.
inline Backends make_backends(const BackendConfig& cfg, CeReduction reduction,
                              std::shared_ptr<ResponseCache> cache = nullptr) {
  cfg.validate();
  Backends b;
  if (cfg.kind == BackendKind::mock) {
    b = make_mock_backends(cfg.mock_embed_dim, reduction);
  } else {
    HttpOptions base;
    base.endpoint_url = cfg.endpoint_url;
    base.model_id = cfg.model_id;
    base.auth_env_var = cfg.auth_env_var;
    base.timeout_s = cfg.timeout_s;
    base.max_attempts = cfg.max_attempts;
    base.backoff_ms = cfg.backoff_ms;
    base.response_path = cfg.response_path;
    base.ce_reduction = reduction;

    b.generator = std::make_shared<HttpGenerator>(base);
    HttpOptions judge = base;
    if (!cfg.judge_model_id.empty()) judge.model_id = cfg.judge_model_id;
    b.judge = std::make_shared<HttpGenerator>(judge);

    HttpOptions embed = base;
    embed.model_id = cfg.embed_model_id;
    embed.endpoint_url = cfg.embed_endpoint_url.empty()
                             ? sibling_endpoint(cfg.endpoint_url, "/embeddings")
                             : cfg.embed_endpoint_url;
    if (!cfg.embed_auth_env_var.empty()) embed.auth_env_var = cfg.embed_auth_env_var;
    b.embedder = std::make_shared<HttpEmbedder>(embed);

    HttpOptions score = base;
    score.model_id = cfg.scorer_model_id;
    score.endpoint_url = cfg.scorer_endpoint_url.empty()
                             ? sibling_endpoint(cfg.endpoint_url, "/completions")
                             : cfg.scorer_endpoint_url;
    if (!cfg.scorer_auth_env_var.empty()) score.auth_env_var = cfg.scorer_auth_env_var;
    b.scorer = std::make_shared<HttpScorer>(score);
  }
  if (cache) {
    b.generator = std::make_shared<CachingGenerator>(b.generator, cache);
    b.judge = std::make_shared<CachingGenerator>(b.judge, cache);
  }
  return b;
}

}  // namespace humorib

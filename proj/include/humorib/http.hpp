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

// HTTP model backends speaking OpenAI-style JSON:
//   generator  POST chat/completions, image sent as a base64 data URL
//   embedder   POST embeddings, vectors read from /data/<i>/embedding
//   scorer     POST completions with echo + logprobs over context + target
//
// Bearer tokens come from the environment variable named in the config.
// Transport errors, 429 and 5xx are retried with exponential backoff.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "humorib/backends.hpp"

namespace humorib {

struct HttpOptions {
  std::string endpoint_url;  // full URL, e.g. https://host/v1/chat/completions
  std::string model_id;
  std::string auth_env_var;  // empty: no Authorization header
  double timeout_s = 60.0;
  int max_attempts = 3;
  double backoff_ms = 500.0;  // first retry delay, doubled each attempt
  std::string response_path = "/choices/0/message/content";
  CeReduction ce_reduction = CeReduction::mean;
};

inline std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

inline std::string image_mime_type(std::string_view path) {
  auto ends = [&](std::string_view ext) {
    if (path.size() < ext.size()) return false;
    for (std::size_t i = 0; i < ext.size(); ++i)
      if (std::tolower(static_cast<unsigned char>(path[path.size() - ext.size() + i])) != ext[i])
        return false;
    return true;
  };
  if (ends(".png")) return "image/png";
  if (ends(".gif")) return "image/gif";
  if (ends(".webp")) return "image/webp";
  return "image/jpeg";
}

inline std::string image_data_url(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read image " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return "data:" + image_mime_type(path) + ";base64," + base64_encode(buf.str());
}

namespace http_detail {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline Url split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw InputError("endpoint URL needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

/// POSTs `body` and returns the parsed JSON response, retrying transient
/// failures. The last failure is rethrown as a non-retryable BackendError.
inline nlohmann::json post_json(const HttpOptions& opt, const std::string& url,
                                const nlohmann::json& body) {
  if (opt.max_attempts < 1) throw InputError("max_attempts must be >= 1");
  const auto target = split_url(url);
  httplib::Headers headers;
  if (!opt.auth_env_var.empty()) {
    const char* token = std::getenv(opt.auth_env_var.c_str());
    if (!token || !*token)
      throw BackendError("environment variable " + opt.auth_env_var + " is not set", false);
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }
  const std::string payload = body.dump();
  std::string last_error;
  double delay = opt.backoff_ms;
  for (int attempt = 1; attempt <= opt.max_attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay));
      delay *= 2.0;
    }
    httplib::Client cli(target.origin);
    const auto secs = std::chrono::duration<double>(opt.timeout_s);
    cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
    cli.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
    cli.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
    auto res = cli.Post(target.path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300)
      throw BackendError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200),
                         false, attempt);
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(std::string("malformed response JSON: ") + e.what(), false, attempt);
    }
  }
  throw BackendError(url + " failed after " + std::to_string(opt.max_attempts) +
                         " attempts (" + last_error + ")",
                     false, opt.max_attempts);
}

inline double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

}  // namespace http_detail

class HttpGenerator : public Generator {
 public:
  explicit HttpGenerator(HttpOptions opt) : opt_(std::move(opt)) {
    if (opt_.endpoint_url.empty() || opt_.model_id.empty())
      throw InputError("http generator needs endpoint_url and model_id");
  }

  nlohmann::json request_body(const GenerationRequest& req) const {
    nlohmann::json content = nlohmann::json::array();
    content.push_back({{"type", "text"}, {"text", req.prompt}});
    if (req.image)
      content.push_back({{"type", "image_url"}, {"image_url", {{"url", image_data_url(*req.image)}}}});
    nlohmann::json body{{"model", opt_.model_id},
                        {"messages", {{{"role", "user"}, {"content", content}}}},
                        {"temperature", req.temperature},
                        {"max_tokens", req.max_output_tokens}};
    if (req.seed) body["seed"] = *req.seed;
    return body;
  }

  Generation generate(const GenerationRequest& req) override {
    req.validate();
    const auto start = std::chrono::steady_clock::now();
    const auto res = http_detail::post_json(opt_, opt_.endpoint_url, request_body(req));
    const nlohmann::json::json_pointer ptr(opt_.response_path);
    if (!res.contains(ptr) || !res.at(ptr).is_string())
      throw BackendError("response has no text at " + opt_.response_path, false);
    return {res.at(ptr).get<std::string>(), http_detail::elapsed_ms(start)};
  }

  std::string id() const override { return "http:" + opt_.model_id; }

 private:
  HttpOptions opt_;
};

class HttpEmbedder : public Embedder {
 public:
  explicit HttpEmbedder(HttpOptions opt) : opt_(std::move(opt)) {
    if (opt_.endpoint_url.empty() || opt_.model_id.empty())
      throw InputError("http embedder needs endpoint_url and model_id");
  }

  std::vector<Embedding> embed(const std::vector<std::string>& texts) override {
    check_embed_inputs(texts);
    const auto res = http_detail::post_json(
        opt_, opt_.endpoint_url, {{"model", opt_.model_id}, {"input", texts}});
    std::vector<Embedding> out;
    try {
      const auto& data = res.at("data");
      if (data.size() != texts.size())
        throw BackendError("embedding count mismatch", false);
      for (const auto& item : data) {
        auto v = item.at("embedding").get<Embedding>();
        l2_normalize(v);
        out.push_back(std::move(v));
      }
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(std::string("malformed embedding response: ") + e.what(), false);
    }
    std::lock_guard<std::mutex> lock(mu_);
    for (const auto& v : out) {
      if (dim_ == 0) dim_ = v.size();
      if (v.size() != dim_) throw BackendError("embedding dimension changed", false);
    }
    return out;
  }

  std::string id() const override { return "http-embed:" + opt_.model_id; }

 private:
  HttpOptions opt_;
  std::mutex mu_;
  std::size_t dim_ = 0;
};

/// Cross-entropy from echoed prompt log-probabilities. The target follows
/// the context after a newline; tokens starting at or after the end of the
/// context count toward the target.
class HttpScorer : public Scorer {
 public:
  explicit HttpScorer(HttpOptions opt) : opt_(std::move(opt)) {
    if (opt_.endpoint_url.empty() || opt_.model_id.empty())
      throw InputError("http scorer needs endpoint_url and model_id");
  }

  double score_cross_entropy(std::string_view context, std::string_view target) override {
    check_score_inputs(context, target);
    const std::string prompt = std::string(context) + "\n" + std::string(target);
    const auto res = http_detail::post_json(opt_, opt_.endpoint_url,
                                            {{"model", opt_.model_id},
                                             {"prompt", prompt},
                                             {"max_tokens", 0},
                                             {"echo", true},
                                             {"logprobs", 0},
                                             {"temperature", 0}});
    double sum = 0.0;
    std::size_t count = 0;
    try {
      const auto& lp = res.at("choices").at(0).at("logprobs");
      const auto& values = lp.at("token_logprobs");
      const auto& offsets = lp.at("text_offset");
      for (std::size_t i = 0; i < values.size() && i < offsets.size(); ++i) {
        if (values[i].is_null()) continue;
        if (offsets[i].get<std::size_t>() < context.size()) continue;
        sum -= values[i].get<double>();
        ++count;
      }
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(std::string("malformed logprob response: ") + e.what(), false);
    }
    if (count == 0) throw BackendError("scorer returned no target tokens", false);
    return opt_.ce_reduction == CeReduction::sum ? sum : sum / static_cast<double>(count);
  }

  std::string id() const override { return "http-score:" + opt_.model_id; }

 private:
  HttpOptions opt_;
};

}  // namespace humorib

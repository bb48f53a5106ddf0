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

// Dataset ingestion, seeded sampling, the on-disk response cache and
// JSONL record persistence.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "humorib/backends.hpp"
#include "humorib/serialize.hpp"

namespace humorib {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Dataset

/// One JSON object per line: {id, image_path, caption, dataset, references?}.
/// Relative image paths resolve against the dataset file's directory.
/// Episodes whose image file is missing are skipped with a warning.
inline std::vector<Episode> load_dataset(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dataset " + path.string());
  std::vector<Episode> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim_view(line).empty()) continue;
    Episode ep;
    try {
      ep = nlohmann::json::parse(line).get<Episode>();
      if (ep.image.empty()) throw InputError("image_path is missing");
      ep.validate();
    } catch (const std::exception& e) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    fs::path image(ep.image);
    if (image.is_relative()) image = path.parent_path() / image;
    if (!fs::exists(image)) {
      log_warning("skipping episode " + ep.id + ": image " + image.string() + " not found");
      continue;
    }
    ep.image = image.lexically_normal().string();
    out.push_back(std::move(ep));
  }
  return out;
}

/// Uniform sample of `n` episodes without replacement, in dataset order.
inline std::vector<Episode> sample_split(const std::vector<Episode>& episodes, std::size_t n,
                                         std::uint64_t seed) {
  if (n > episodes.size())
    throw InputError("cannot sample " + std::to_string(n) + " of " +
                     std::to_string(episodes.size()) + " episodes");
  std::vector<Episode> out;
  out.reserve(n);
  std::mt19937_64 rng(seed);
  std::sample(episodes.begin(), episodes.end(), std::back_inserter(out), n, rng);
  return out;
}

// ---------------------------------------------------------------------------
// Response cache

/// Content-addressed store: <dir>/<key[0:2]>/<key>.json. Writes land in a
/// temporary file that is renamed into place, so readers see either nothing
/// or a complete entry. Unreadable entries count as misses and are removed.
class ResponseCache {
 public:
  explicit ResponseCache(fs::path dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
  }

  static std::string make_key(std::string_view backend_id, const GenerationRequest& req) {
    nlohmann::json j{{"backend", backend_id},
                     {"prompt", req.prompt},
                     {"temperature", req.temperature},
                     {"max_output_tokens", req.max_output_tokens},
                     {"seed", req.seed ? nlohmann::json(*req.seed) : nlohmann::json()},
                     {"image", req.image ? nlohmann::json(*req.image) : nlohmann::json()}};
    return sha256_hex(j.dump());
  }

  std::optional<std::string> get(const std::string& key) const {
    const auto p = path_of(key);
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    std::stringstream buf;
    buf << in.rdbuf();
    try {
      const auto j = nlohmann::json::parse(buf.str());
      if (j.at("key").get<std::string>() != key) throw InputError("key mismatch");
      return j.at("value").get<std::string>();
    } catch (const std::exception&) {
      log_warning("evicting corrupt cache entry " + p.string());
      std::error_code ec;
      fs::remove(p, ec);
      return std::nullopt;
    }
  }

  void put(const std::string& key, const std::string& value) const {
    const auto p = path_of(key);
    fs::create_directories(p.parent_path());
    static std::atomic<std::uint64_t> counter{0};
    std::ostringstream tmp_name;
    tmp_name << p.filename().string() << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id())
             << "." << counter.fetch_add(1);
    const auto tmp = p.parent_path() / tmp_name.str();
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw BackendError("cannot write cache entry " + tmp.string(), false);
      out << nlohmann::json{{"key", key}, {"value", value}}.dump();
      if (!out.flush()) throw BackendError("cannot write cache entry " + tmp.string(), false);
    }
    fs::rename(tmp, p);
  }

  const fs::path& dir() const { return dir_; }

 private:
  fs::path path_of(const std::string& key) const {
    return dir_ / key.substr(0, 2) / (key + ".json");
  }

  fs::path dir_;
};

/// Serves repeated requests from the cache; only misses reach `inner`.
class CachingGenerator : public Generator {
 public:
  CachingGenerator(std::shared_ptr<Generator> inner, std::shared_ptr<ResponseCache> cache)
      : inner_(std::move(inner)), cache_(std::move(cache)) {}

  Generation generate(const GenerationRequest& req) override {
    const auto key = ResponseCache::make_key(inner_->id(), req);
    if (auto hit = cache_->get(key)) return {std::move(*hit), 0.0};
    auto out = inner_->generate(req);
    cache_->put(key, out.text);
    return out;
  }

  std::string id() const override { return inner_->id(); }

 private:
  std::shared_ptr<Generator> inner_;
  std::shared_ptr<ResponseCache> cache_;
};

// ---------------------------------------------------------------------------
// Records

/// Appends one JSON record per line, flushing each, so an interrupted run
/// leaves a readable prefix. Safe to share between threads.
class RecordWriter {
 public:
  explicit RecordWriter(const fs::path& path, bool append = false)
      : out_(path, append ? std::ios::app : std::ios::trunc) {
    if (!out_) throw InputError("cannot open " + path.string() + " for writing");
  }

  template <typename T>
  void write(const T& record) {
    const std::string line = nlohmann::json(record).dump() + "\n";
    std::lock_guard<std::mutex> lock(mu_);
    out_ << line;
    out_.flush();
    if (!out_) throw std::runtime_error("record write failed");
  }

 private:
  std::mutex mu_;
  std::ofstream out_;
};

/// Reads a JSONL file of `T`. A malformed last line without a trailing
/// newline (an interrupted write) is dropped with a warning; any other
/// malformed line is an error naming its line number.
template <typename T = EpisodeRecord>
std::vector<T> read_jsonl(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string data = buf.str();
  std::vector<T> out;
  std::size_t pos = 0, lineno = 0;
  while (pos < data.size()) {
    const auto nl = data.find('\n', pos);
    const bool terminated = nl != std::string::npos;
    const std::string line = data.substr(pos, terminated ? nl - pos : std::string::npos);
    pos = terminated ? nl + 1 : data.size();
    ++lineno;
    if (trim_view(line).empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<T>());
    } catch (const std::exception& e) {
      if (!terminated) {
        log_warning(path.string() + ": dropping truncated final line");
        break;
      }
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<EpisodeRecord> read_records(const fs::path& path) {
  return read_jsonl<EpisodeRecord>(path);
}

}  // namespace humorib

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

#include <openssl/evp.h>

#include <array>
#include <atomic>
#include <cctype>
#include <cstdint>
#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace humorib {

/// Malformed caller input (empty text, dimension mismatch, bad config).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A generation step produced nothing usable for an episode.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Transport or provider failure. `retryable()` is true while the caller may
/// still try again; the error surfaced after the last attempt is final.
class BackendError : public std::runtime_error {
 public:
  BackendError(const std::string& what, bool retryable, int attempts = 1)
      : std::runtime_error(what), retryable_(retryable), attempts_(attempts) {}

  bool retryable() const noexcept { return retryable_; }
  int attempts() const noexcept { return attempts_; }

 private:
  bool retryable_;
  int attempts_;
};

// ---------------------------------------------------------------------------
// Logging. Warnings go to stderr unless silenced (tests silence them).

inline std::atomic<bool>& warnings_enabled() {
  static std::atomic<bool> enabled{true};
  return enabled;
}

/// Warnings issued so far, printed or not.
inline std::atomic<std::size_t>& warning_count() {
  static std::atomic<std::size_t> count{0};
  return count;
}

inline void log_warning(std::string_view msg) {
  warning_count().fetch_add(1);
  if (!warnings_enabled().load()) return;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[humorib] warning: " << msg << '\n';
}

// ---------------------------------------------------------------------------
// Hashing

inline std::array<unsigned char, 32> sha256(std::string_view data) {
  std::array<unsigned char, 32> out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(),
                 nullptr) != 1) {
    throw std::runtime_error("sha256 digest failed");
  }
  return out;
}

inline std::string sha256_hex(std::string_view data) {
  static constexpr char kHex[] = "0123456789abcdef";
  const auto digest = sha256(data);
  std::string hex;
  hex.reserve(64);
  for (unsigned char b : digest) {
    hex.push_back(kHex[b >> 4]);
    hex.push_back(kHex[b & 0xF]);
  }
  return hex;
}

/// First 8 bytes of SHA-256, big-endian. Stable across platforms and runs.
inline std::uint64_t hash64(std::string_view data) {
  const auto digest = sha256(data);
  std::uint64_t h = 0;
  for (int i = 0; i < 8; ++i) h = (h << 8) | digest[i];
  return h;
}

// ---------------------------------------------------------------------------
// Text helpers

inline bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

inline std::string_view trim_view(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::string trim(std::string_view s) { return std::string(trim_view(s)); }

/// Splits on '\n' (dropping a trailing '\r'); keeps empty lines.
inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    start = end + 1;
  }
  return lines;
}

inline std::string join(const std::vector<std::string>& parts,
                        std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

/// Token counter used for candidate lengths. Swappable so a backend-specific
/// tokenizer can replace the whitespace default.
using Tokenizer = std::function<std::size_t(std::string_view)>;

inline std::size_t whitespace_token_count(std::string_view text) {
  std::size_t count = 0;
  bool in_token = false;
  for (char c : text) {
    if (is_space(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++count;
    }
  }
  return count;
}

}  // namespace humorib

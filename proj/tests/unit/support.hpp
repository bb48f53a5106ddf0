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

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "humorib/mock.hpp"
#include "humorib/prompts.hpp"
#include "humorib/types.hpp"

namespace humorib::test {

namespace fs = std::filesystem;

/// Silences warnings for the whole test binary; counts are still kept.
inline const bool kQuietWarnings = [] {
  warnings_enabled() = false;
  return true;
}();

/// Counts warnings issued while it is alive.
class WarningProbe {
 public:
  WarningProbe() : start_(warning_count().load()) {}
  std::size_t count() const { return warning_count().load() - start_; }

 private:
  std::size_t start_;
};

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("humorib-test-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline const TemplateLibrary& templates() {
  static const TemplateLibrary lib = TemplateLibrary::load();
  return lib;
}

inline Episode episode(std::string id = "ep-1", Dataset d = Dataset::newyorker) {
  Episode ep;
  ep.id = std::move(id);
  ep.image = "images/" + ep.id + ".png";
  ep.caption = "We should schedule the meeting after the deadline.";
  ep.dataset = d;
  ep.references = {"The boss schedules a meeting after the deadline has already passed."};
  return ep;
}

/// Synthetic episodes with varied captions.
inline std::vector<Episode> episodes(std::size_t n) {
  static const char* kCaptions[] = {
      "I told you the snowman would want a summer job.",
      "Next time, book the taxi before the airport closes.",
      "The cat insists the table is part of the economy.",
      "My doctor says the plunger is a metaphor.",
      "The scarecrow finally got a promotion at the office."};
  std::vector<Episode> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto ep = episode("ep-" + std::to_string(i),
                      static_cast<Dataset>(i % 3));
    ep.caption = std::string(kCaptions[i % std::size(kCaptions)]) + " (" + std::to_string(i) + ")";
    out.push_back(std::move(ep));
  }
  return out;
}

/// Random unit vector of dimension `dim`.
inline Embedding random_unit(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  Embedding v(dim);
  for (auto& x : v) x = g(rng);
  l2_normalize(v);
  return v;
}

}  // namespace humorib::test

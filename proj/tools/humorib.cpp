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


// Command-line front end: run, baseline, eval, attribute, ablate-alpha, report.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "humorib/config.hpp"
#include "humorib/eval.hpp"
#include "humorib/io.hpp"
#include "humorib/pipeline.hpp"
#include "humorib/shap.hpp"

namespace {

using namespace humorib;
using nlohmann::json;

struct Common {
  std::string dataset;
  std::size_t n = 100;
  std::uint64_t seed = 0;
  int hops = 2;
  int k = 3;
  double alpha = 0.7;
  std::string backend;
  std::string cache_dir;
  std::size_t workers = 1;
  std::string out;
  std::string prompts = HUMORIB_PROMPT_DIR;
  std::string ce_reduction = "mean";
  std::string multi_ref = "max";
};

void add_backend_options(CLI::App& cmd, Common& c) {
  cmd.add_option("--backend", c.backend, "Backend config JSON (default: built-in mocks)")
      ->check(CLI::ExistingFile);
  cmd.add_option("--cache-dir", c.cache_dir, "Response cache directory");
  cmd.add_option("--prompts", c.prompts, "Prompt template directory")->check(CLI::ExistingDirectory);
  cmd.add_option("--ce-reduction", c.ce_reduction, "Cross-entropy reduction")
      ->check(CLI::IsMember({"mean", "sum"}));
  cmd.add_option("--seed", c.seed, "Random seed");
}

void add_run_options(CLI::App& cmd, Common& c) {
  cmd.add_option("--dataset", c.dataset, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  cmd.add_option("--n", c.n, "Episodes to sample")->check(CLI::PositiveNumber);
  cmd.add_option("--hops", c.hops, "Refinement hops")->check(CLI::NonNegativeNumber);
  cmd.add_option("--k", c.k, "Implications kept per hop")->check(CLI::PositiveNumber);
  cmd.add_option("--alpha", c.alpha, "Relevance weight")->check(CLI::NonNegativeNumber);
  cmd.add_option("--workers", c.workers, "Concurrent episodes")->check(CLI::PositiveNumber);
  cmd.add_option("--out", c.out, "Records JSONL output")->required();
  add_backend_options(cmd, c);
}

PipelineConfig make_config(const Common& c) {
  PipelineConfig cfg;
  cfg.alpha = c.alpha;
  cfg.hops = c.hops;
  cfg.k = c.k;
  cfg.rng_seed = c.seed;
  cfg.ce_reduction = c.ce_reduction == "sum" ? CeReduction::sum : CeReduction::mean;
  cfg.multi_ref = c.multi_ref == "mean" ? MultiRef::mean : MultiRef::max;
  cfg.validate();
  return cfg;
}

Backends make_backends_for(const Common& c, CeReduction reduction) {
  BackendConfig bc;
  if (!c.backend.empty()) bc = load_backend_config(c.backend);
  std::shared_ptr<ResponseCache> cache;
  if (!c.cache_dir.empty()) cache = std::make_shared<ResponseCache>(c.cache_dir);
  return make_backends(bc, reduction, cache);
}

std::vector<Episode> sampled_episodes(const Common& c) {
  return sample_split(load_dataset(c.dataset), c.n, c.seed);
}

template <typename Fn>
std::size_t run_to_file(const std::vector<Episode>& episodes, std::size_t workers,
                        const std::string& out, Fn&& fn) {
  RecordWriter writer(out);
  std::size_t failed = 0;
  run_batch(episodes, workers, fn, [&](const EpisodeRecord& rec) {
    if (rec.status == RecordStatus::failed) {
      ++failed;
      log_warning("episode " + rec.episode_id + " failed: " + rec.error);
    }
    writer.write(rec);
  });
  std::cerr << "wrote " << episodes.size() << " records to " << out << " (" << failed
            << " failed)\n";
  return failed;
}

std::map<std::string, std::vector<std::string>> references_of(const std::string& dataset) {
  std::map<std::string, std::vector<std::string>> refs;
  for (auto& ep : load_dataset(dataset)) refs[ep.id] = std::move(ep.references);
  return refs;
}

void write_json(const std::string& path, const json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << j.dump(2) << '\n';
}

void print_summary(const EvalReport& r) {
  std::printf("%-14s %6s %8s %8s %9s\n", "split", "n", "P", "R", "macro-F1");
  for (const auto& s : r.per_split)
    std::printf("%-14s %6zu %8.4f %8.4f %9.4f\n", s.split.c_str(), s.instances,
                s.mean_precision, s.mean_recall, s.macro_f1);
  const auto& a = r.aggregate;
  std::printf("%-14s %6zu %8.4f %8.4f %9.4f\n", "mean", a.splits, a.mean_precision,
              a.mean_recall, a.macro_f1);
  std::printf("%-14s %6s %8.4f %8.4f %9.4f\n", "stddev", "", a.stddev_precision,
              a.stddev_recall, a.stddev_macro_f1);
  if (a.unscorable) std::printf("unscorable: %zu\n", a.unscorable);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Humor explanation pipeline with information-bottleneck selection"};
  app.require_subcommand(1);
  Common c;

  auto* run = app.add_subcommand("run", "Run the multi-hop pipeline over a dataset sample");
  add_run_options(*run, c);

  std::string mode = "zs";
  auto* baseline = app.add_subcommand("baseline", "Run a baseline over a dataset sample");
  add_run_options(*baseline, c);
  baseline->add_option("--mode", mode, "zs, cot, sr or sr_noc")
      ->check(CLI::IsMember({"zs", "cot", "sr", "sr_noc", "sr-noc"}));

  std::vector<std::string> record_files;
  std::string annotated;
  bool per_hop = false;
  auto* eval = app.add_subcommand("eval", "Score records against dataset references");
  eval->add_option("--records", record_files, "Records JSONL (one per split)")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--dataset", c.dataset, "Dataset JSONL with references")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--multi-ref", c.multi_ref, "Recall across references")
      ->check(CLI::IsMember({"max", "mean"}));
  eval->add_flag("--per-hop", per_hop, "Also score each hop's best candidate");
  eval->add_option("--annotated", annotated, "Write records with per-hop metrics here");
  eval->add_option("--out", c.out, "Evaluation report JSON (default: stdout)");
  add_backend_options(*eval, c);

  std::string episode_id;
  double ratio = 0.5;
  auto* attribute = app.add_subcommand("attribute", "Sentence attribution of a final prompt");
  attribute->add_option("--records", record_files, "Records JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  attribute->add_option("--id", episode_id, "Episode id (default: first record)");
  attribute->add_option("--ratio", ratio, "Share of subsets to sample")
      ->check(CLI::Range(0.0, 1.0));
  attribute->add_option("--out", c.out, "Attribution JSON (default: table on stdout)");
  add_backend_options(*attribute, c);

  auto* ablate = app.add_subcommand("ablate-alpha", "Sweep alpha over 0, 0.3, 0.7 and 1");
  add_run_options(*ablate, c);

  std::vector<std::string> report_files;
  auto* report = app.add_subcommand("report", "Combine evaluation reports across splits");
  report->add_option("reports", report_files, "Evaluation report JSON files")
      ->required()
      ->check(CLI::ExistingFile);
  report->add_option("--out", c.out, "Combined report JSON (default: summary only)");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto templates = TemplateLibrary::load(c.prompts);

    if (*run) {
      const auto cfg = make_config(c);
      const auto backends = make_backends_for(c, cfg.ce_reduction);
      const auto episodes = sampled_episodes(c);
      run_to_file(episodes, c.workers, c.out, [&](const Episode& ep) {
        return run_episode(ep, cfg, backends, templates);
      });
    } else if (*baseline) {
      const auto cfg = make_config(c);
      const auto backends = make_backends_for(c, cfg.ce_reduction);
      const auto m = parse_baseline_mode(mode);
      const auto episodes = sampled_episodes(c);
      run_to_file(episodes, c.workers, c.out, [&](const Episode& ep) {
        return run_baseline(ep, m, cfg, backends, templates);
      });
    } else if (*eval) {
      const auto cfg = make_config(c);
      const auto backends = make_backends_for(c, cfg.ce_reduction);
      JudgeContext judge{*backends.judge, templates, cfg, nullptr};
      std::vector<EpisodeRecord> records;
      for (const auto& f : record_files) {
        auto part = read_records(f);
        records.insert(records.end(), part.begin(), part.end());
      }
      auto result = evaluate_records(std::move(records), references_of(c.dataset), judge,
                                     per_hop || !annotated.empty());
      if (!annotated.empty()) {
        RecordWriter writer(annotated);
        for (const auto& r : result.annotated) writer.write(r);
      }
      if (!c.out.empty()) write_json(c.out, result.report);
      print_summary(result.report);
    } else if (*attribute) {
      const auto cfg = make_config(c);
      const auto backends = make_backends_for(c, cfg.ce_reduction);
      const auto records = read_records(record_files.front());
      const EpisodeRecord* rec = nullptr;
      for (const auto& r : records) {
        if (episode_id.empty() || r.episode_id == episode_id) {
          rec = &r;
          break;
        }
      }
      if (!rec) throw InputError("no record for episode " + episode_id);
      if (rec->final_prompt.empty()) throw InputError("record has no final prompt");
      GenerationRequest proto;
      proto.temperature = rec->config.gen_temperature;
      proto.max_output_tokens = rec->config.max_output_tokens;
      proto.seed = rec->config.rng_seed;
      if (!rec->image.empty()) proto.image = rec->image;
      std::mt19937_64 rng(c.seed);
      const auto result = sentence_shap(split_sentences(rec->final_prompt), *backends.generator,
                                        *backends.embedder, ratio, rng, proto);
      if (!c.out.empty()) write_json(c.out, result);
      std::cout << format_attribution_table(result);
    } else if (*ablate) {
      const auto base = make_config(c);
      const auto backends = make_backends_for(c, base.ce_reduction);
      const auto episodes = sampled_episodes(c);
      std::map<std::string, std::vector<std::string>> refs;
      for (const auto& ep : episodes) refs[ep.id] = ep.references;
      JudgeContext judge{*backends.judge, templates, base, nullptr};
      json sweep = json::array();
      std::printf("%-6s %8s %8s %9s\n", "alpha", "P", "R", "macro-F1");
      for (double a : {0.0, 0.3, 0.7, 1.0}) {
        auto cfg = base;
        cfg.alpha = a;
        char suffix[32];
        std::snprintf(suffix, sizeof suffix, ".alpha-%.1f.jsonl", a);
        const std::string path = c.out + suffix;
        run_to_file(episodes, c.workers, path, [&](const Episode& ep) {
          return run_episode(ep, cfg, backends, templates);
        });
        json row{{"alpha", a}, {"records", path}};
        try {
          auto result = evaluate_records(read_records(path), refs, judge, true);
          const auto& agg = result.report.aggregate;
          std::printf("%-6.1f %8.4f %8.4f %9.4f\n", a, agg.mean_precision, agg.mean_recall,
                      agg.macro_f1);
          row["report"] = result.report;
        } catch (const InputError& e) {
          std::printf("%-6.1f %s\n", a, e.what());
        }
        sweep.push_back(std::move(row));
      }
      write_json(c.out + ".summary.json", sweep);
    } else if (*report) {
      std::vector<InstanceScore> all;
      std::size_t unscorable = 0;
      for (std::size_t i = 0; i < report_files.size(); ++i) {
        std::ifstream in(report_files[i]);
        const auto j = json::parse(in);
        auto part = j.at("per_instance").get<std::vector<InstanceScore>>();
        for (auto& s : part) {
          if (s.split.empty()) s.split = report_files[i];
        }
        all.insert(all.end(), part.begin(), part.end());
        if (j.contains("aggregate")) unscorable += j["aggregate"].value("unscorable", 0U);
      }
      const auto combined = aggregate(std::move(all), unscorable);
      if (!c.out.empty()) write_json(c.out, combined);
      print_summary(combined);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

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


#include <chrono>
#include <set>
#include <thread>

#include "humorib/pipeline.hpp"
#include "humorib/serialize.hpp"
#include "support.hpp"

namespace humorib {
namespace {

PipelineConfig config(int hops = 2, int k = 3) {
  PipelineConfig cfg;
  cfg.hops = hops;
  cfg.k = k;
  cfg.rng_seed = 42;
  return cfg;
}

EpisodeRecord run(const Episode& ep, const PipelineConfig& cfg, const Backends& b) {
  return run_episode(ep, cfg, b, test::templates());
}

std::size_t count_role(const EpisodeRecord& rec, std::string_view role) {
  return static_cast<std::size_t>(std::count_if(rec.calls.begin(), rec.calls.end(),
                                                [&](const CallRecord& c) { return c.role == role; }));
}

std::size_t generator_calls(const EpisodeRecord& rec) {
  return rec.calls.size() - count_role(rec, "embed") - count_role(rec, "score");
}

TEST(RunEpisodeTest, ZeroHopsAnswersWithoutImplications) {
  auto b = make_mock_backends();
  const auto rec = run(test::episode(), config(0), b);
  ASSERT_EQ(rec.status, RecordStatus::ok) << rec.error;
  ASSERT_EQ(rec.hop_states.size(), 1U);
  const auto& h0 = rec.hop_states[0];
  EXPECT_TRUE(h0.selected_implications.empty());
  ASSERT_EQ(h0.candidates.size(), 1U);
  EXPECT_EQ(rec.final_prompt,
            render_final_prompt(test::templates(), test::episode(), {}, texts_of(h0.candidates)));
  EXPECT_EQ(count_role(rec, "score"), 0U);
  EXPECT_EQ(count_role(rec, "embed"), 0U);
  EXPECT_EQ(generator_calls(rec), generator_call_budget(rec));
  EXPECT_FALSE(rec.final_answer.empty());
}

TEST(RunEpisodeTest, RepeatedRunsAreIdentical) {
  for (const auto& ep : test::episodes(6)) {
    auto b1 = make_mock_backends();
    auto b2 = make_mock_backends();
    const auto a = run(ep, config(), b1);
    const auto b = run(ep, config(), b2);
    EXPECT_EQ(a, b);
    EXPECT_EQ(nlohmann::json(a).dump(), nlohmann::json(b).dump());
  }
}

TEST(RunEpisodeTest, SeedChangesTheRun) {
  auto b = make_mock_backends();
  auto cfg = config();
  const auto a = run(test::episode(), cfg, b);
  cfg.rng_seed = 43;
  const auto c = run(test::episode(), cfg, b);
  EXPECT_NE(a.final_answer, c.final_answer);
}

TEST(RunEpisodeTest, HopCapsHold) {
  for (const auto& ep : test::episodes(12)) {
    auto b = make_mock_backends();
    const auto rec = run(ep, config(2, 3), b);
    ASSERT_NE(rec.status, RecordStatus::failed) << rec.error;
    ASSERT_EQ(rec.hop_states.size(), 3U);
    std::size_t cumulative = 0;
    for (std::size_t h = 0; h < rec.hop_states.size(); ++h) {
      const auto& s = rec.hop_states[h];
      EXPECT_EQ(s.hop, static_cast<int>(h));
      EXPECT_LE(s.candidates.size(), 3U);
      EXPECT_GE(s.candidates.size(), 1U);
      if (h == 0) continue;
      EXPECT_LE(s.implication_pool.size(), 15U);
      EXPECT_LE(s.selected_implications.size(), 3U);
      cumulative += s.selected_implications.size();
      EXPECT_LE(cumulative, 3U * h);
      for (const auto& p : s.selected_implications) EXPECT_EQ(p.hop_born, static_cast<int>(h));
    }
    EXPECT_LE(cumulative, 6U);
  }
}

TEST(RunEpisodeTest, SelectedItemsComeFromTheScoredPool) {
  for (const auto& ep : test::episodes(8)) {
    auto b = make_mock_backends();
    const auto rec = run(ep, config(), b);
    for (std::size_t h = 1; h < rec.hop_states.size(); ++h) {
      const auto& s = rec.hop_states[h];
      for (const auto& sel : s.selected_implications) {
        const auto it = std::find(s.implication_pool.begin(), s.implication_pool.end(), sel);
        EXPECT_NE(it, s.implication_pool.end()) << sel.text;
        EXPECT_TRUE(sel.combined_score && std::isfinite(*sel.combined_score));
        EXPECT_FALSE(sel.embedding);
      }
    }
  }
}

TEST(RunEpisodeTest, FinalPromptUsesOnlyTheLastHopState) {
  for (const auto& ep : test::episodes(8)) {
    auto b = make_mock_backends();
    const auto rec = run(ep, config(), b);
    ASSERT_NE(rec.status, RecordStatus::failed) << rec.error;
    const auto& last = rec.hop_states.back();
    EXPECT_EQ(rec.final_prompt,
              render_final_prompt(test::templates(), ep, texts_of(last.selected_implications),
                                  texts_of(last.candidates)));
    for (const auto& d : last.descriptions)
      EXPECT_EQ(rec.final_prompt.find(d.text), std::string::npos);
    for (const auto& p : rec.hop_states[1].selected_implications)
      EXPECT_EQ(rec.final_prompt.find(p.text), std::string::npos) << "earlier hop leaked";
  }
}

TEST(RunEpisodeTest, CallCountsMatchClosedForm) {
  for (const auto& ep : test::episodes(12)) {
    for (int hops : {0, 1, 2, 3}) {
      auto b = make_mock_backends();
      const auto rec = run(ep, config(hops), b);
      ASSERT_EQ(rec.status, RecordStatus::ok) << rec.error;
      const auto gen = std::static_pointer_cast<MockGenerator>(b.generator);
      EXPECT_EQ(gen->calls(), generator_call_budget(rec));
      EXPECT_EQ(generator_calls(rec), generator_call_budget(rec));
      EXPECT_EQ(count_role(rec, "score"), scorer_call_budget(rec));
      EXPECT_EQ(count_role(rec, "embed"), embed_call_budget(rec));
    }
  }
}

TEST(RunEpisodeTest, BudgetFromBranchSizes) {
  const auto cfg = config(2, 3);
  // 1 description + 2 windows + 1 initial + (3 cand + 3 follow-up) + 3 cand + 1 final
  EXPECT_EQ(generator_call_budget(3, {3, 3}, cfg), 14U);
  EXPECT_EQ(generator_call_budget(1, {}, config(0)), 4U);
}

TEST(RunEpisodeTest, TotalOutageFailsCleanly) {
  auto b = make_mock_backends();
  b.generator = std::make_shared<MockGenerator>(
      "down", [](const GenerationRequest&) -> std::optional<std::string> {
        throw BackendError("down", false, 3);
      });
  const auto rec = run(test::episode(), config(), b);
  EXPECT_EQ(rec.status, RecordStatus::failed);
  EXPECT_NE(rec.error.find("down"), std::string::npos);
  EXPECT_TRUE(rec.hop_states.empty());
  EXPECT_TRUE(rec.final_answer.empty());
}

TEST(RunEpisodeTest, FollowupOutageKeepsEarlierHops) {
  auto b = make_mock_backends();
  b.generator = std::make_shared<MockGenerator>(
      "no-followups", [](const GenerationRequest& r) -> std::optional<std::string> {
        if (r.prompt.find("- [Implication]:") != std::string::npos)
          throw BackendError("nope", false, 3);
        return std::nullopt;
      });
  const auto rec = run(test::episode(), config(), b);
  ASSERT_EQ(rec.status, RecordStatus::partial) << rec.error;
  ASSERT_EQ(rec.hop_states.size(), 3U);
  EXPECT_FALSE(rec.hop_states[1].selected_implications.empty());
  EXPECT_TRUE(rec.hop_states[2].implication_pool.empty());
  EXPECT_NE(std::find(rec.flags.begin(), rec.flags.end(), "empty_pool_hop_2"), rec.flags.end());
  EXPECT_FALSE(rec.final_answer.empty());
}

TEST(RunEpisodeTest, InvalidInputsFailTheRecord) {
  auto b = make_mock_backends();
  auto cfg = config();
  cfg.k = 0;
  EXPECT_EQ(run(test::episode(), cfg, b).status, RecordStatus::failed);
  auto ep = test::episode();
  ep.caption.clear();
  EXPECT_EQ(run(ep, config(), b).status, RecordStatus::failed);
}

TEST(RunEpisodeTest, EmbeddingsKeptOnRequest) {
  auto b = make_mock_backends(16);
  auto cfg = config(1);
  cfg.store_embeddings = true;
  const auto rec = run(test::episode(), cfg, b);
  for (const auto& p : rec.hop_states[1].implication_pool) EXPECT_TRUE(p.embedding);
}

// ---------------------------------------------------------------------------
// Baselines

TEST(BaselineTest, CallCountsPerMode) {
  const std::pair<const char*, std::size_t> cases[] = {
      {"zs", 1}, {"cot", 1}, {"sr", 5}, {"sr_noc", 3}, {"sr-noc", 3}};
  for (const auto& [mode, calls] : cases) {
    auto b = make_mock_backends();
    const auto rec = run_baseline(test::episode(), parse_baseline_mode(mode), config(), b,
                                  test::templates());
    EXPECT_NE(rec.status, RecordStatus::failed) << mode << ": " << rec.error;
    EXPECT_EQ(std::static_pointer_cast<MockGenerator>(b.generator)->calls(), calls) << mode;
    EXPECT_EQ(rec.calls.size(), calls) << mode;
    EXPECT_TRUE(rec.hop_states.empty());
  }
}

TEST(BaselineTest, CriticOnlyInFullRefinement) {
  auto b = make_mock_backends();
  const auto sr = run_baseline(test::episode(), BaselineMode::sr, config(), b, test::templates());
  EXPECT_EQ(count_role(sr, "sr_critic"), 2U);
  EXPECT_EQ(count_role(sr, "sr_generator"), 3U);
  const auto noc =
      run_baseline(test::episode(), BaselineMode::sr_noc, config(), b, test::templates());
  EXPECT_EQ(count_role(noc, "sr_critic"), 0U);
  EXPECT_EQ(count_role(noc, "sr_generator"), 3U);
}

TEST(BaselineTest, CriticNeverSeesTheImage) {
  std::size_t critic_with_image = 0, critic_calls = 0;
  Backends b = make_mock_backends();
  b.generator = std::make_shared<MockGenerator>(
      "watch", [&](const GenerationRequest& r) -> std::optional<std::string> {
        if (r.prompt.find("criticize the candidate") != std::string::npos) {
          ++critic_calls;
          if (r.image) ++critic_with_image;
        }
        return std::nullopt;
      });
  run_baseline(test::episode(), BaselineMode::sr, config(), b, test::templates());
  EXPECT_EQ(critic_calls, 2U);
  EXPECT_EQ(critic_with_image, 0U);
}

TEST(BaselineTest, CotParsesJsonOrFallsBack) {
  auto b = make_mock_backends();
  const auto raw = run_baseline(test::episode(), BaselineMode::cot, config(), b, test::templates());
  EXPECT_EQ(raw.status, RecordStatus::partial);
  EXPECT_EQ(raw.flags, std::vector<std::string>{"cot_parse_fallback"});
  EXPECT_FALSE(raw.final_answer.empty());

  b.generator = std::make_shared<MockGenerator>(
      "json", [](const GenerationRequest&) -> std::optional<std::string> {
        return "```json\n{\"Reasoning\": \"r\", \"Explanation\": \"It is ironic.\"}\n```";
      });
  const auto parsed =
      run_baseline(test::episode(), BaselineMode::cot, config(), b, test::templates());
  EXPECT_EQ(parsed.status, RecordStatus::ok);
  EXPECT_EQ(parsed.final_answer, "It is ironic.");
}

TEST(BaselineTest, ParseCotExplanationEdgeCases) {
  EXPECT_EQ(parse_cot_explanation(R"({"explanation": " x "})"), "x");
  EXPECT_FALSE(parse_cot_explanation("no json here"));
  EXPECT_FALSE(parse_cot_explanation(R"({"Reasoning": "only"})"));
  EXPECT_FALSE(parse_cot_explanation(R"({"Explanation": ""})"));
  EXPECT_FALSE(parse_cot_explanation("{broken"));
  EXPECT_THROW(parse_baseline_mode("ib"), InputError);
}

// ---------------------------------------------------------------------------
// Batches

TEST(RunBatchTest, EmitsInDatasetOrderDespiteUnevenWork) {
  const auto eps = test::episodes(24);
  std::vector<std::string> order;
  run_batch(
      eps, 6,
      [](const Episode& ep) {
        std::this_thread::sleep_for(std::chrono::microseconds(hash64(ep.id) % 3000));
        EpisodeRecord r;
        r.episode_id = ep.id;
        return r;
      },
      [&](const EpisodeRecord& r) { order.push_back(r.episode_id); });
  ASSERT_EQ(order.size(), eps.size());
  for (std::size_t i = 0; i < eps.size(); ++i) EXPECT_EQ(order[i], eps[i].id);
}

TEST(RunBatchTest, FailedEpisodesDoNotStopTheBatch) {
  auto eps = test::episodes(6);
  eps[2].caption.clear();
  auto b = make_mock_backends();
  std::vector<EpisodeRecord> out;
  run_batch(
      eps, 3, [&](const Episode& ep) { return run_episode(ep, config(1), b, test::templates()); },
      [&](const EpisodeRecord& r) { out.push_back(r); });
  ASSERT_EQ(out.size(), 6U);
  for (std::size_t i = 0; i < out.size(); ++i)
    EXPECT_EQ(out[i].status == RecordStatus::failed, i == 2) << i;
}

TEST(RunBatchTest, ParallelMatchesSequential) {
  const auto eps = test::episodes(10);
  auto collect = [&](std::size_t workers) {
    auto b = make_mock_backends();
    std::vector<std::string> lines;
    run_batch(
        eps, workers, [&](const Episode& ep) { return run_episode(ep, config(), b, test::templates()); },
        [&](const EpisodeRecord& r) { lines.push_back(nlohmann::json(r).dump()); });
    return lines;
  };
  EXPECT_EQ(collect(1), collect(4));
}

TEST(RunBatchTest, SinkErrorsPropagate) {
  const auto eps = test::episodes(5);
  EXPECT_THROW(run_batch(
                   eps, 2, [](const Episode&) { return EpisodeRecord{}; },
                   [](const EpisodeRecord&) { throw std::runtime_error("disk full"); }),
               std::runtime_error);
  std::size_t n = 0;
  run_batch({}, 4, [](const Episode&) { return EpisodeRecord{}; },
            [&](const EpisodeRecord&) { ++n; });
  EXPECT_EQ(n, 0U);
}

}  // namespace
}  // namespace humorib

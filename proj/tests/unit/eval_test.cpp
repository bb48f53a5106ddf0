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


#include <map>

#include "humorib/eval.hpp"
#include "humorib/pipeline.hpp"
#include "support.hpp"

namespace humorib {
namespace {

/// Judge answering from tables: decompositions by exact text and verdicts by
/// (atom, direction). Unlisted verdicts are "No"; unlisted texts decompose
/// to nothing.
class TableJudge {
 public:
  std::map<std::string, std::vector<std::string>> atoms;
  std::map<std::pair<std::string, VerifyDirection>, std::string> verdicts;
  std::vector<GenerationRequest> requests;

  std::shared_ptr<MockGenerator> generator() {
    return std::make_shared<MockGenerator>(
        "table-judge", [this](const GenerationRequest& r) -> std::optional<std::string> {
          requests.push_back(r);
          return answer(r.prompt);
        });
  }

 private:
  std::string answer(const std::string& prompt) {
    if (auto s1 = mock_detail::field_after(prompt, "[Sentence1]:")) {
      const auto dir = prompt.find("is conveyed in") != std::string::npos
                           ? VerifyDirection::recall
                           : VerifyDirection::precision;
      auto it = verdicts.find({*s1, dir});
      return it == verdicts.end() ? "No" : it->second;
    }
    const auto text = mock_detail::field_after(prompt, "[Text]:").value_or("");
    auto it = atoms.find(text);
    return it == atoms.end() ? "" : format_numbered(it->second);
  }
};

struct Fixture {
  Fixture() : gen(judge.generator()), ctx{*gen, test::templates(), cfg, &log} {}

  TableJudge judge;
  PipelineConfig cfg;
  CallLog log;
  std::shared_ptr<MockGenerator> gen;
  JudgeContext ctx;
};

// ---------------------------------------------------------------------------
// Verdicts and decomposition

TEST(ParseVerdictTest, NormalizesLeadingWord) {
  EXPECT_EQ(parse_verdict("Yes"), true);
  EXPECT_EQ(parse_verdict("No."), false);
  EXPECT_EQ(parse_verdict("  **yes**, because"), true);
  EXPECT_EQ(parse_verdict("NO"), false);
  EXPECT_EQ(parse_verdict("Maybe"), std::nullopt);
  EXPECT_EQ(parse_verdict("Nope"), std::nullopt);
  EXPECT_EQ(parse_verdict(""), std::nullopt);
}

TEST(VerifyAtomTest, YesNoAndFallback) {
  Fixture f;
  f.judge.verdicts[{"a", VerifyDirection::recall}] = "Yes";
  f.judge.verdicts[{"b", VerifyDirection::recall}] = "No.";
  f.judge.verdicts[{"c", VerifyDirection::recall}] = "Maybe";
  EXPECT_TRUE(verify_atom("a", "text", VerifyDirection::recall, f.ctx));
  EXPECT_FALSE(verify_atom("b", "text", VerifyDirection::recall, f.ctx));
  test::WarningProbe probe;
  EXPECT_FALSE(verify_atom("c", "text", VerifyDirection::recall, f.ctx));
  EXPECT_EQ(probe.count(), 1U);
  EXPECT_THROW(verify_atom("", "text", VerifyDirection::recall, f.ctx), InputError);
}

TEST(VerifyAtomTest, DirectionsUseDistinctPromptsAndJudgeTemperature) {
  Fixture f;
  f.judge.verdicts[{"a", VerifyDirection::precision}] = "Yes";
  EXPECT_FALSE(verify_atom("a", "text", VerifyDirection::recall, f.ctx));
  EXPECT_TRUE(verify_atom("a", "text", VerifyDirection::precision, f.ctx));
  ASSERT_EQ(f.judge.requests.size(), 2U);
  EXPECT_NE(f.judge.requests[0].prompt, f.judge.requests[1].prompt);
  for (const auto& r : f.judge.requests) {
    EXPECT_DOUBLE_EQ(r.temperature, 0.2);
    EXPECT_FALSE(r.image);
  }
  EXPECT_EQ(f.log.count("verify_recall"), 1U);
  EXPECT_EQ(f.log.count("verify_precision"), 1U);
}

TEST(DecomposeTest, ParsesNumberedAtoms) {
  Fixture f;
  f.judge.atoms["One claim. Another claim."] = {"One claim.", "Another claim."};
  const auto atoms = decompose_atoms("One claim. Another claim.", AtomSource::prediction, f.ctx);
  ASSERT_EQ(atoms.size(), 2U);
  EXPECT_EQ(atoms[1].text, "Another claim.");
  EXPECT_EQ(atoms[1].source, AtomSource::prediction);
  EXPECT_TRUE(decompose_atoms("unknown", AtomSource::reference, f.ctx).empty());
  EXPECT_THROW(decompose_atoms("  ", AtomSource::reference, f.ctx), InputError);
}

TEST(DecomposeTest, OverlapJudgeSplitsSentences) {
  auto judge = make_overlap_judge();
  PipelineConfig cfg;
  JudgeContext ctx{*judge, test::templates(), cfg};
  EXPECT_EQ(decompose_atoms("Single claim here.", AtomSource::reference, ctx).size(), 1U);
  EXPECT_GE(decompose_atoms("The boss is late. The meeting is moot.", AtomSource::reference, ctx)
                .size(),
            2U);
}

// ---------------------------------------------------------------------------
// Instance scoring

TEST(ScoreInstanceTest, RecallPrecisionAndF1) {
  Fixture f;
  f.judge.atoms["ref"] = {"r1", "r2", "r3", "r4"};
  f.judge.atoms["pred"] = {"p1", "p2"};
  for (const char* a : {"r1", "r2", "r4"}) f.judge.verdicts[{a, VerifyDirection::recall}] = "Yes";
  for (const char* a : {"p1", "p2"}) f.judge.verdicts[{a, VerifyDirection::precision}] = "Yes";
  const auto s = score_instance("id", "pred", {"ref"}, {}, f.ctx);
  ASSERT_TRUE(s);
  EXPECT_DOUBLE_EQ(s->recall, 0.75);
  EXPECT_DOUBLE_EQ(s->precision, 1.0);
  EXPECT_DOUBLE_EQ(s->f1, 2 * 0.75 / 1.75);
  EXPECT_EQ(s->atom_verdicts.size(), 6U);
}

TEST(ScoreInstanceTest, HarmonicMean) {
  EXPECT_NEAR(f1_score(0.8, 0.4), 0.533333333333333, 1e-12);
  EXPECT_EQ(f1_score(0.0, 0.0), 0.0);
  EXPECT_EQ(f1_score(1.0, 0.0), 0.0);
}

TEST(ScoreInstanceTest, MultipleReferencesMaxOrMean) {
  Fixture f;
  f.judge.atoms["pred"] = {"p"};
  f.judge.atoms["ref a"] = {"a1", "a2"};
  f.judge.atoms["ref b"] = {"b1"};
  f.judge.verdicts[{"a1", VerifyDirection::recall}] = "Yes";
  f.judge.verdicts[{"b1", VerifyDirection::recall}] = "Yes";
  EXPECT_DOUBLE_EQ(score_instance("id", "pred", {"ref a", "ref b"}, {}, f.ctx)->recall, 1.0);
  f.cfg.multi_ref = MultiRef::mean;
  EXPECT_DOUBLE_EQ(score_instance("id", "pred", {"ref a", "ref b"}, {}, f.ctx)->recall, 0.75);
}

TEST(ScoreInstanceTest, DescriptionAtomsJoinThePrecisionReference) {
  Fixture f;
  f.judge.atoms["pred"] = {"p"};
  f.judge.atoms["ref"] = {"r"};
  f.judge.atoms["A dog sits.\nA cat naps."] = {"A dog sits.", "A cat naps."};
  const std::vector<Description> descs{{"A dog sits.", 1}, {"A cat naps.", 1}};
  score_instance("id", "pred", {"ref"}, descs, f.ctx);
  const auto& last = f.judge.requests.back().prompt;
  EXPECT_NE(last.find("[Sentence2]: ref\nA dog sits.\nA cat naps."), std::string::npos);
}

TEST(ScoreInstanceTest, UnscorableCases) {
  Fixture f;
  f.judge.atoms["ref"] = {"r"};
  EXPECT_FALSE(score_instance("id", "pred without atoms", {"ref"}, {}, f.ctx));
  EXPECT_FALSE(score_instance("id", "", {"ref"}, {}, f.ctx));
  f.judge.atoms["pred"] = {"p"};
  EXPECT_FALSE(score_instance("id", "pred", {"ref without atoms", " "}, {}, f.ctx));
  EXPECT_THROW(score_instance("id", "pred", {}, {}, f.ctx), InputError);
}

std::string random_sentence(std::mt19937_64& rng) {
  std::string s = "The";
  for (int w = 0; w < 5; ++w) s += " " + std::string(mock_detail::kVocabulary[rng() % 40]);
  return s + ".";
}

TEST(ScoreInstanceTest, SwappingRolesSwapsScores) {
  auto judge = make_overlap_judge();
  PipelineConfig cfg;
  JudgeContext ctx{*judge, test::templates(), cfg};
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    const auto a = random_sentence(rng) + " " + random_sentence(rng);
    const auto b = random_sentence(rng) + " " + random_sentence(rng) + " " + random_sentence(rng);
    const auto ab = score_instance("x", a, {b}, {}, ctx);
    const auto ba = score_instance("x", b, {a}, {}, ctx);
    ASSERT_TRUE(ab && ba);
    EXPECT_DOUBLE_EQ(ab->precision, ba->recall);
    EXPECT_DOUBLE_EQ(ab->recall, ba->precision);
    EXPECT_GE(ab->f1, 0.0);
    EXPECT_LE(ab->f1, 1.0);
  }
}

TEST(ScoreInstanceTest, DescriptionAugmentationNeverLowersPrecision) {
  auto judge = make_overlap_judge();
  PipelineConfig cfg;
  JudgeContext ctx{*judge, test::templates(), cfg};
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    const auto pred = random_sentence(rng) + " " + random_sentence(rng);
    const auto ref = random_sentence(rng);
    const std::vector<Description> descs{{random_sentence(rng), 1}, {random_sentence(rng), 1}};
    const auto plain = score_instance("x", pred, {ref}, {}, ctx);
    const auto augmented = score_instance("x", pred, {ref}, descs, ctx);
    EXPECT_GE(augmented->precision, plain->precision);
    EXPECT_DOUBLE_EQ(augmented->recall, plain->recall);
  }
}

// ---------------------------------------------------------------------------
// Aggregation

InstanceScore scored(std::string split, double p, double r, double f1) {
  InstanceScore s;
  s.split = std::move(split);
  s.precision = p;
  s.recall = r;
  s.f1 = f1;
  return s;
}

TEST(AggregateTest, MacroF1IsMeanOfInstanceF1) {
  const auto rep = aggregate({scored("s", 1.0, 0.2, 0.5), scored("s", 0.5, 0.9, 0.7)});
  EXPECT_DOUBLE_EQ(rep.aggregate.macro_f1, 0.6);
  EXPECT_DOUBLE_EQ(rep.aggregate.mean_precision, 0.75);
  EXPECT_DOUBLE_EQ(rep.aggregate.f1_of_means, f1_score(0.75, 0.55));
  EXPECT_EQ(rep.aggregate.splits, 1U);
  EXPECT_EQ(rep.aggregate.stddev_macro_f1, 0.0);
}

TEST(AggregateTest, SampleStddevAcrossSplits) {
  const auto rep = aggregate({scored("a", 48, 48, 48), scored("b", 50, 50, 50),
                              scored("c", 52, 52, 52)},
                             2);
  EXPECT_DOUBLE_EQ(rep.aggregate.macro_f1, 50.0);
  EXPECT_DOUBLE_EQ(rep.aggregate.stddev_macro_f1, 2.0);
  EXPECT_DOUBLE_EQ(rep.aggregate.stddev_precision, 2.0);
  EXPECT_EQ(rep.aggregate.unscorable, 2U);
  ASSERT_EQ(rep.per_split.size(), 3U);
  EXPECT_EQ(rep.per_split[0].split, "a");
  EXPECT_EQ(rep.per_split[2].split, "c");
}

TEST(AggregateTest, IdenticalSplitsHaveZeroSpread) {
  const auto rep = aggregate({scored("a", 0.4, 0.6, 0.48), scored("b", 0.4, 0.6, 0.48),
                              scored("c", 0.4, 0.6, 0.48)});
  EXPECT_EQ(rep.aggregate.stddev_macro_f1, 0.0);
  EXPECT_EQ(rep.aggregate.stddev_recall, 0.0);
  EXPECT_THROW(aggregate({}), InputError);
}

// ---------------------------------------------------------------------------
// Record batches

std::map<std::string, std::vector<std::string>> references_of(const std::vector<Episode>& eps) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& ep : eps) out[ep.id] = ep.references;
  return out;
}

TEST(EvaluateRecordsTest, CountsUnscorableAndSplitsBySeed) {
  const auto eps = test::episodes(6);
  auto b = make_mock_backends();
  PipelineConfig cfg;
  cfg.hops = 1;
  std::vector<EpisodeRecord> recs;
  for (std::uint64_t seed : {1U, 2U}) {
    cfg.rng_seed = seed;
    for (const auto& ep : eps) recs.push_back(run_episode(ep, cfg, b, test::templates()));
  }
  recs[0].status = RecordStatus::failed;
  auto refs = references_of(eps);
  refs.erase(eps[1].id);

  JudgeContext ctx{*b.judge, test::templates(), cfg};
  const auto out = evaluate_records(recs, refs, ctx, true);
  EXPECT_EQ(out.report.aggregate.unscorable, 3U);
  EXPECT_EQ(out.report.per_instance.size(), 9U);
  EXPECT_EQ(out.report.aggregate.splits, 2U);
  EXPECT_EQ(out.report.per_split[0].split, "seed=1");
  ASSERT_EQ(out.annotated.size(), recs.size());
  EXPECT_EQ(out.annotated[2].hop_metrics.size(), 2U);
  EXPECT_TRUE(out.annotated[1].hop_metrics.empty());
}

TEST(EvaluateRecordsTest, NothingScorableIsAnError) {
  auto b = make_mock_backends();
  PipelineConfig cfg;
  JudgeContext ctx{*b.judge, test::templates(), cfg};
  EpisodeRecord rec;
  rec.episode_id = "ghost";
  EXPECT_THROW(evaluate_records({rec}, {}, ctx), InputError);
}

TEST(EvaluateRecordsTest, ScoresLieInUnitInterval) {
  const auto eps = test::episodes(8);
  auto b = make_mock_backends();
  PipelineConfig cfg;
  std::vector<EpisodeRecord> recs;
  for (const auto& ep : eps)
    recs.push_back(run_baseline(ep, BaselineMode::zs, cfg, b, test::templates()));
  JudgeContext ctx{*b.judge, test::templates(), cfg};
  const auto out = evaluate_records(recs, references_of(eps), ctx);
  for (const auto& s : out.report.per_instance) {
    for (double v : {s.precision, s.recall, s.f1}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_LE(s.f1, std::max(s.precision, s.recall) + 1e-12);
  }
}

}  // namespace
}  // namespace humorib

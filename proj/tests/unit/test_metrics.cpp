// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "chexpo/confidence.hpp"
#include "chexpo/metrics.hpp"
#include "chexpo/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace chexpo::metrics {
namespace {

using Tokens = std::vector<std::string>;

TEST(StrictAccuracy, Examples) {
  EXPECT_EQ(strict_accuracy({{{"yes"}, "Yes"}, {{"a", "b"}, "b and a"}}), 1.0);
  EXPECT_EQ(strict_accuracy({{{"yes"}, "yes"}, {{"no"}, "yes"}}), 0.5);
  EXPECT_CHEXPO_ERROR(strict_accuracy({}), "empty-input");
}

TEST(MicroF1, Examples) {
  const auto hand = micro_f1({{{"a", "b"}, {"a"}}});
  EXPECT_EQ(hand.precision, 1.0);
  EXPECT_EQ(hand.recall, 0.5);
  EXPECT_NEAR(hand.f1, 2.0 / 3.0, 1e-15);

  const auto same = micro_f1({{{"a"}, {"a"}}, {{"x", "y"}, {"y", "x"}}});
  EXPECT_EQ(same.f1, 1.0);
  const auto disjoint = micro_f1({{{"a"}, {"b"}}, {{"c"}, {"d", "e"}}});
  EXPECT_EQ(disjoint.precision, 0.0);
  EXPECT_EQ(disjoint.recall, 0.0);
  EXPECT_EQ(disjoint.f1, 0.0);
}

TEST(AnswerSet, SplitsPredictionOnConjunction) {
  EXPECT_EQ(answer_set("Left Lung and right lung"), (std::set<std::string>{"left lung", "right lung"}));
  EXPECT_EQ(answer_set(std::vector<std::string>{"A", "a"}), (std::set<std::string>{"a"}));
}

TEST(Bleu, Examples) {
  const Tokens abc = {"a", "b", "c", "d"};
  for (int n = 1; n <= 4; ++n) EXPECT_NEAR(bleu_n(abc, {abc}, n), 1.0, 1e-15);
  EXPECT_NEAR(bleu_n({"a", "b", "c"}, {{"a", "b", "d"}}, 1), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(bleu_n({"a"}, {{"a", "b", "b", "b"}}, 1), std::exp(-3.0), 1e-15);
  EXPECT_NEAR(bleu_n({"a"}, {{"a", "b", "b", "b"}}, 1), 0.0498, 5e-5);
  EXPECT_EQ(bleu_n({"a", "b"}, {{"a", "b"}}, 3), 0.0);
  EXPECT_CHEXPO_ERROR(bleu_n({}, {{"a"}}, 1), "empty-prediction");
  EXPECT_CHEXPO_ERROR(bleu_n({"a"}, {{"a"}}, 5), "invalid-order");
}

TEST(Bleu, ClipsRepeatedTokensAndPicksClosestReference) {
  // "the the the" against "the cat": one clipped match out of three
  EXPECT_NEAR(bleu_n({"the", "the", "the"}, {{"the", "cat"}}, 1), 1.0 / 3.0, 1e-15);
  // closest reference length ties resolve to the shorter one (2 over 4)
  const double got = bleu_n({"a", "b", "c"}, {{"a", "b", "c", "d"}, {"a", "b"}}, 1);
  EXPECT_NEAR(got, 1.0, 1e-15);
  const double longer = bleu_n({"a", "x"}, {{"a", "b", "c", "d", "e"}}, 1);
  EXPECT_NEAR(longer, 0.5 * std::exp(1.0 - 5.0 / 2.0), 1e-15);
}

TEST(WinRate, Examples) {
  const auto same = win_rate({true, false}, {true, false});
  EXPECT_EQ(same.decisive, 0.5);
  EXPECT_EQ(win_rate({true, true}, {false, false}).decisive, 1.0);
  const auto w = win_rate({true, false, true}, {false, false, true});
  EXPECT_EQ(w.decisive, 1.0);
  EXPECT_NEAR(w.raw, 1.0 / 3.0, 1e-15);
  EXPECT_EQ(w.a_wins, 1u);
  EXPECT_EQ(w.ties, 2u);
  EXPECT_CHEXPO_ERROR(win_rate({true}, {}), "length-mismatch");
}

TEST(ErrorDistribution, Examples) {
  std::vector<TriagedItem> items;
  for (int i = 0; i < 7; ++i) items.push_back({QuestionType::Abnormality, TriageClass::Fail, -1.0});
  for (int i = 0; i < 2; ++i) items.push_back({QuestionType::Anatomy, TriageClass::Fail, -0.5});
  items.push_back({QuestionType::Plane, TriageClass::Fail, -0.2});
  items.push_back({QuestionType::Plane, TriageClass::ConfidentCorrect, -0.1});
  const auto d = error_distribution(items);
  EXPECT_EQ(d.total_fails, 10u);
  EXPECT_NEAR(d.by_type.at(QuestionType::Abnormality).fail_share, 0.7, 1e-15);
  EXPECT_NEAR(d.by_type.at(QuestionType::Anatomy).fail_share, 0.2, 1e-15);
  EXPECT_NEAR(d.by_type.at(QuestionType::Plane).fail_share, 0.1, 1e-15);
  EXPECT_NEAR(d.by_type.at(QuestionType::Plane).mean_logprob, -0.15, 1e-15);
  EXPECT_NEAR(d.combined_share({QuestionType::Abnormality, QuestionType::Anatomy}), 0.9, 1e-15);

  const auto single = error_distribution({{QuestionType::Size, TriageClass::Fail, -1.0}});
  EXPECT_EQ(single.by_type.at(QuestionType::Size).fail_share, 1.0);
}

TEST(Oracle, RandomFixturesMatchNaiveLoops) {
  Rng rng(2024);
  const std::vector<std::string> words = {"a", "b", "c", "d", "e"};
  for (int fixture = 0; fixture < 200; ++fixture) {
    const std::size_t n = 1 + rng.uniform_index(12);
    std::vector<AnswerItem> acc_items;
    std::vector<AnswerSets> f1_items;
    std::vector<std::pair<std::set<std::string>, std::set<std::string>>> oracle_sets;
    std::vector<bool> a(n), b(n), acc_oracle;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::string> gold;
      for (const auto& w : words) {
        if (rng.uniform01() < 0.3) gold.push_back(w);
      }
      if (gold.empty()) gold.push_back(words[rng.uniform_index(words.size())]);
      std::vector<std::string> pred_parts;
      for (const auto& w : words) {
        if (rng.uniform01() < 0.3) pred_parts.push_back(w);
      }
      if (pred_parts.empty()) pred_parts.push_back(words[rng.uniform_index(words.size())]);
      std::string pred;
      for (std::size_t k = 0; k < pred_parts.size(); ++k) pred += (k ? " and " : "") + pred_parts[k];
      acc_items.push_back({gold, pred});
      const std::set<std::string> gs(gold.begin(), gold.end()), ps(pred_parts.begin(), pred_parts.end());
      acc_oracle.push_back(gs == ps);
      f1_items.push_back({answer_set(gold), answer_set(pred)});
      oracle_sets.push_back({gs, ps});
      a[i] = rng.uniform01() < 0.5;
      b[i] = rng.uniform01() < 0.5;
    }
    EXPECT_EQ(strict_accuracy(acc_items), oracle::accuracy(acc_oracle));
    const auto f1 = micro_f1(f1_items);
    const auto want = oracle::micro_f1(oracle_sets);
    EXPECT_EQ(f1.precision, want.p);
    EXPECT_EQ(f1.recall, want.r);
    EXPECT_EQ(f1.f1, want.f1);
    const auto w = win_rate(a, b);
    const auto ow = oracle::win_rate(a, b);
    EXPECT_EQ(w.decisive, ow.decisive);
    EXPECT_EQ(w.raw, ow.raw);

    Tokens pred(1 + rng.uniform_index(10));
    for (auto& t : pred) t = words[rng.uniform_index(3)];
    std::vector<Tokens> refs(1 + rng.uniform_index(3));
    for (auto& r : refs) {
      r.resize(1 + rng.uniform_index(10));
      for (auto& t : r) t = words[rng.uniform_index(3)];
    }
    for (int order = 1; order <= 4; ++order) {
      EXPECT_EQ(bleu_n(pred, refs, order), oracle::bleu(pred, refs, order)) << "fixture " << fixture;
    }
  }
}

TEST(Evaluate, GroupsAndOptionalSections) {
  SampleSet samples;
  samples.add(testing::sample("a", QuestionType::Presence, AnswerType::Closed, {"yes"}));
  samples.add(testing::sample("b", QuestionType::Anatomy, AnswerType::Open, {"left lung"}));
  samples.add(testing::sample("c", QuestionType::Anatomy, AnswerType::Open, {"right lung"}));
  const std::vector<PredictionRecord> preds = {testing::prediction("a", "yes", {-0.1}),
                                               testing::prediction("b", "left lung", {-0.1}),
                                               testing::prediction("c", "left lung", {-0.1})};
  const std::vector<PredictionRecord> base = {testing::prediction("a", "no", {-0.1}),
                                              testing::prediction("b", "left lung", {-0.1}),
                                              testing::prediction("c", "right lung", {-0.1})};
  const auto r = evaluate(samples, preds, true, &base);
  EXPECT_EQ(r.overall.correct, 2u);
  EXPECT_EQ(r.overall.total, 3u);
  EXPECT_EQ(r.by_question_type.at(QuestionType::Anatomy).correct, 1u);
  EXPECT_EQ(r.by_answer_type.at(AnswerType::Closed).accuracy(), 1.0);
  ASSERT_TRUE(r.bleu);
  EXPECT_NEAR((*r.bleu)[0], (1.0 + 1.0 + 0.5) / 3.0, 1e-15);
  ASSERT_TRUE(r.win_rate);
  EXPECT_EQ(r.win_rate->a_wins, 1u);
  EXPECT_EQ(r.win_rate->b_wins, 1u);
  EXPECT_EQ(r.win_rate->decisive, 0.5);

  const auto plain = evaluate(samples, preds, false);
  EXPECT_FALSE(plain.bleu);
  EXPECT_FALSE(plain.win_rate);
  const auto table = report_to_table(r, "model");
  EXPECT_NE(table.find("Anatomy"), std::string::npos);
  EXPECT_NE(report_to_json(r).find("\"overall\""), std::string::npos);
  EXPECT_CHEXPO_ERROR(evaluate(samples, {testing::prediction("zz", "x", {-1})}, false),
                      "unknown-sample-id");
}

}  // namespace
}  // namespace chexpo::metrics

// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "chexpo/rng.hpp"
#include "chexpo/sampling.hpp"
#include "test_util.hpp"

namespace chexpo {
namespace {

SampleSet strata_set(const std::vector<std::pair<StratumKey, std::size_t>>& sizes) {
  SampleSet set;
  std::size_t n = 0;
  for (const auto& [key, count] : sizes) {
    for (std::size_t i = 0; i < count; ++i) {
      const std::string id = "s" + std::to_string(n++);
      set.add(testing::sample(id, key.question_type, key.answer_type,
                              {key.answer_type == AnswerType::Closed ? "yes" : "x"}));
    }
  }
  return set;
}

SampleSet random_set(Rng& rng, std::size_t n) {
  SampleSet set;
  for (std::size_t i = 0; i < n; ++i) {
    const auto q = kQuestionTypes[rng.uniform_index(kQuestionTypes.size())];
    const auto a = rng.uniform01() < 0.3 ? AnswerType::Closed : AnswerType::Open;
    set.add(testing::sample("r" + std::to_string(i), q, a, {a == AnswerType::Closed ? "no" : "x"}));
  }
  return set;
}

TEST(Stratify, Examples) {
  EXPECT_TRUE(stratify(SampleSet{}).empty());
  const auto one = stratify(strata_set({{{QuestionType::Presence, AnswerType::Closed}, 3}}));
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].members.size(), 3u);
}

TEST(Stratify, MatchesBruteForceGrouping) {
  Rng rng(5);
  const auto set = random_set(rng, 400);
  std::map<StratumKey, std::size_t> counts;
  for (const auto& s : set) ++counts[{s.question_type, s.answer_type}];
  const auto strata = stratify(set);
  ASSERT_EQ(strata.size(), counts.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < strata.size(); ++i) {
    EXPECT_EQ(strata[i].members.size(), counts.at(strata[i].key));
    if (i) EXPECT_LT(strata[i - 1].key, strata[i].key);
    total += strata[i].members.size();
  }
  EXPECT_EQ(total, set.size());
}

TEST(Stratify, FourKeys) {
  const auto strata = stratify(strata_set({{{QuestionType::Size, AnswerType::Open}, 2},
                                           {{QuestionType::Presence, AnswerType::Closed}, 3},
                                           {{QuestionType::Presence, AnswerType::Open}, 1},
                                           {{QuestionType::Gender, AnswerType::Open}, 4}}));
  ASSERT_EQ(strata.size(), 4u);
  EXPECT_EQ(strata[0].key.question_type, QuestionType::Presence);
  EXPECT_EQ(strata[0].key.answer_type, AnswerType::Open);
  EXPECT_EQ(strata[3].key.question_type, QuestionType::Gender);
}

TEST(Apportion, LargestRemainderWithKeyOrderTieBreak) {
  EXPECT_EQ(apportion({7, 3}, 0.5), (std::vector<std::size_t>{4, 1}));
  EXPECT_EQ(apportion(std::vector<std::size_t>(10, 100), 0.1), std::vector<std::size_t>(10, 10));
  EXPECT_EQ(apportion({5, 1}, 1.0), (std::vector<std::size_t>{5, 1}));
}

TEST(StratifiedSample, TenEvenStrata) {
  std::vector<std::pair<StratumKey, std::size_t>> sizes;
  for (QuestionType q : kQuestionTypes) sizes.push_back({{q, AnswerType::Open}, 100});
  const auto set = strata_set(sizes);
  const auto sel = stratified_selection(set, 0.10, 1);
  EXPECT_EQ(sel.indices.size(), 100u);
  std::map<QuestionType, int> per;
  for (auto i : sel.indices) ++per[set[i].question_type];
  for (const auto& [q, c] : per) EXPECT_EQ(c, 10);
}

TEST(StratifiedSample, UnevenStrataExample) {
  const auto set = strata_set({{{QuestionType::Presence, AnswerType::Closed}, 7},
                               {{QuestionType::Abnormality, AnswerType::Open}, 3}});
  const auto sel = stratified_selection(set, 0.5, 99);
  std::size_t a = 0, b = 0;
  for (auto i : sel.indices) (set[i].question_type == QuestionType::Presence ? a : b)++;
  EXPECT_EQ(a, 4u);
  EXPECT_EQ(b, 1u);
}

TEST(StratifiedSample, FullRatioIsIdentity) {
  Rng rng(3);
  const auto set = random_set(rng, 57);
  for (std::uint64_t seed : {0ULL, 1ULL, 12345ULL}) {
    const auto sel = stratified_selection(set, 1.0, seed);
    ASSERT_EQ(sel.indices.size(), set.size());
    for (std::size_t i = 0; i < set.size(); ++i) EXPECT_EQ(sel.indices[i], i);
  }
}

TEST(StratifiedSample, PropertiesOnRandomSets) {
  Rng rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const auto set = random_set(rng, 50 + rng.uniform_index(500));
    const double gamma = 0.01 + 0.98 * rng.uniform01();
    const auto sel = stratified_selection(set, gamma, trial);
    EXPECT_EQ(sel.indices.size(), static_cast<std::size_t>(std::llround(gamma * set.size())));
    EXPECT_TRUE(std::is_sorted(sel.indices.begin(), sel.indices.end()));
    EXPECT_EQ(std::adjacent_find(sel.indices.begin(), sel.indices.end()), sel.indices.end());
    std::map<StratumKey, std::size_t> picked, total;
    for (const auto& s : set) ++total[{s.question_type, s.answer_type}];
    for (auto i : sel.indices) ++picked[{set[i].question_type, set[i].answer_type}];
    for (const auto& [key, n] : total) {
      EXPECT_LT(std::fabs(static_cast<double>(picked[key]) - gamma * static_cast<double>(n)), 1.0);
    }
    EXPECT_EQ(stratified_selection(set, gamma, trial).indices, sel.indices);
  }
}

TEST(StratifiedSample, SeedChangesSelection) {
  Rng rng(1);
  const auto set = random_set(rng, 300);
  EXPECT_NE(stratified_selection(set, 0.2, 1).indices, stratified_selection(set, 0.2, 2).indices);
}

TEST(StratifiedSample, ReportsUnsampledStrata) {
  const auto set = strata_set({{{QuestionType::Presence, AnswerType::Closed}, 100},
                               {{QuestionType::Gender, AnswerType::Open}, 2}});
  const auto sel = stratified_selection(set, 0.05, 0);
  ASSERT_EQ(sel.unsampled.size(), 1u);
  EXPECT_EQ(sel.unsampled[0].question_type, QuestionType::Gender);
  EXPECT_EQ(stratified_sample(set, 0.05, 0).size(), 5u);
}

TEST(StratifiedSample, InvalidGamma) {
  EXPECT_CHEXPO_ERROR(stratified_selection(SampleSet{}, 0.0, 0), "invalid-gamma");
  EXPECT_CHEXPO_ERROR(stratified_selection(SampleSet{}, 1.5, 0), "invalid-gamma");
}

}  // namespace
}  // namespace chexpo

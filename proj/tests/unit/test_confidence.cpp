// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "chexpo/confidence.hpp"
#include "chexpo/rng.hpp"
#include "test_util.hpp"

namespace chexpo {
namespace {

TEST(LengthNormalizedLogprob, ThresholdConstant) {
  const std::vector<double> tokens = {-0.3, -0.3, -0.3};
  const double p = length_normalized_logprob(tokens);
  EXPECT_NEAR(p, -0.3, 1e-15);
  EXPECT_NEAR(std::exp(p), 0.7408, 0.0005);
  EXPECT_EQ(std::round(std::exp(p) * 1e4) / 1e4, 0.7408);
}

TEST(LengthNormalizedLogprob, Examples) {
  EXPECT_EQ(length_normalized_logprob(std::vector<double>{0.0}), 0.0);
  EXPECT_NEAR(length_normalized_logprob(std::vector<double>{-0.1, -0.2, -0.3}), -0.2, 1e-15);
}

TEST(LengthNormalizedLogprob, Errors) {
  EXPECT_CHEXPO_ERROR(length_normalized_logprob(std::vector<double>{}), "empty-input");
  EXPECT_CHEXPO_ERROR(length_normalized_logprob(std::vector<double>{-0.1, 0.2}), "positive-entry");
  EXPECT_CHEXPO_ERROR(
      length_normalized_logprob(std::vector<double>{-std::numeric_limits<double>::infinity()}),
      "non-finite-entry");
}

TEST(LengthNormalizedLogprob, PermutationInvariantAndBounded) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + rng.uniform_index(40));
    for (auto& x : v) x = -std::exp(6.0 * rng.normal());
    const double p = length_normalized_logprob(v);
    EXPECT_LE(p, 0.0);
    EXPECT_GE(p, *std::min_element(v.begin(), v.end()));
    EXPECT_LE(p, *std::max_element(v.begin(), v.end()));
    std::vector<double> w = v;
    rng.partial_shuffle(std::span<double>(w), w.size());
    EXPECT_EQ(length_normalized_logprob(w), p);
  }
}

TEST(AnswerMatches, Examples) {
  EXPECT_TRUE(answer_matches("Yes", {"yes"}));
  EXPECT_TRUE(answer_matches("right lung and left lung", {"left lung", "right lung"}));
  EXPECT_FALSE(answer_matches("no", {"yes"}));
}

TEST(AnswerMatches, SetSemanticsAgreeWithBruteForceOrderings) {
  const std::vector<std::string> gold = {"pneumonia", "edema", "effusion"};
  std::vector<std::string> perm = gold;
  std::sort(perm.begin(), perm.end());
  do {
    std::string joined;
    for (std::size_t i = 0; i < perm.size(); ++i) joined += (i ? " and " : "") + perm[i];
    EXPECT_TRUE(answer_matches(joined, gold)) << joined;
  } while (std::next_permutation(perm.begin(), perm.end()));
  EXPECT_FALSE(answer_matches("pneumonia and edema", gold));
  EXPECT_FALSE(answer_matches("pneumonia and edema and effusion and mass", gold));
  EXPECT_TRUE(answer_matches("  PNEUMONIA  and edema and Effusion ", gold));
}

TEST(Triage, Classes) {
  const auto s = testing::sample("a", QuestionType::Presence, AnswerType::Closed, {"yes"});
  auto wrong = triage(s, testing::prediction("a", "no", {-0.01}), -0.3);
  EXPECT_EQ(wrong.triage_class, TriageClass::Fail);

  auto low = triage(s, testing::prediction("a", "yes", {-0.5}), -0.3);
  EXPECT_EQ(low.triage_class, TriageClass::LowConfCorrect);
  EXPECT_DOUBLE_EQ(low.logprob, -0.5);

  auto sure = triage(s, testing::prediction("a", "yes", {-0.1}), -0.3);
  EXPECT_EQ(sure.triage_class, TriageClass::ConfidentCorrect);
  EXPECT_DOUBLE_EQ(sure.logprob, -0.1);

  auto boundary = triage(s, testing::prediction("a", "yes", {-0.3}), -0.3);
  EXPECT_EQ(boundary.triage_class, TriageClass::ConfidentCorrect);

  EXPECT_CHEXPO_ERROR(triage(s, testing::prediction("b", "yes", {-0.1}), -0.3), "id-mismatch");
  EXPECT_EQ(to_string(TriageClass::LowConfCorrect), "low_conf_correct");
}

}  // namespace
}  // namespace chexpo

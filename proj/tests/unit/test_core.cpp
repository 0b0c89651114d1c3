// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "chexpo/error.hpp"
#include "chexpo/numeric.hpp"
#include "chexpo/rng.hpp"
#include "chexpo/text.hpp"
#include "chexpo/types.hpp"
#include "test_util.hpp"

namespace chexpo {
namespace {

SampleRecord good_record() {
  return SampleRecord{"s1", {"img1"}, "Is there an effusion?", {"yes"}, "Blunted angle.",
                      "Presence", "closed", "train"};
}

TEST(ValidateSample, WellFormedHasNoViolations) {
  EXPECT_TRUE(validate_sample(good_record()).empty());
}

TEST(ValidateSample, EmptyAnswer) {
  auto r = good_record();
  r.answer.clear();
  EXPECT_EQ(validate_sample(r), std::vector<std::string>{"empty-answer"});
}

TEST(ValidateSample, LocationIsNotACanonicalType) {
  for (QuestionType q : kQuestionTypes) EXPECT_NE(to_string(q), "Location");
  auto r = good_record();
  r.question_type = "Location";
  EXPECT_EQ(validate_sample(r), std::vector<std::string>{"unknown-question-type"});
}

TEST(ValidateSample, ReportsEveryViolationInOrder) {
  SampleRecord r{" ", {}, "", {"a", ""}, "", "Foo", "closed", "dev"};
  const std::vector<std::string> expected = {"empty-id",         "no-image-ids",
                                             "empty-question",   "empty-answer-element",
                                             "unknown-question-type", "closed-answer-not-yes-no",
                                             "unknown-split"};
  EXPECT_EQ(validate_sample(r), expected);
}

TEST(ValidateSample, ClosedAcceptsCaseVariants) {
  auto r = good_record();
  r.answer = {"No"};
  EXPECT_TRUE(validate_sample(r).empty());
  r.answer = {"yes", "no"};
  EXPECT_EQ(validate_sample(r), std::vector<std::string>{"closed-answer-not-yes-no"});
}

TEST(QuestionTypes, ParseIsCaseInsensitiveAndAliasesCanonicalize) {
  EXPECT_EQ(parse_question_type("abnormality"), QuestionType::Abnormality);
  EXPECT_FALSE(parse_question_type("View").has_value());
  EXPECT_EQ(canonical_question_label("View"), "Plane");
  EXPECT_EQ(canonical_question_label("location"), "Anatomy");
  EXPECT_EQ(canonical_question_label("Level"), "Severity");
  EXPECT_EQ(canonical_question_label("Size"), "Size");
  for (QuestionType q : kQuestionTypes) EXPECT_EQ(parse_question_type(to_string(q)), q);
}

TEST(Sample, RationaleJoinsAnswersAndExplanation) {
  const auto s = testing::sample("a", QuestionType::Abnormality, AnswerType::Open,
                                 {"pneumonia", "effusion"}, "Both are visible.");
  EXPECT_EQ(s.answer_text(), "pneumonia and effusion");
  EXPECT_EQ(s.rationale(), "pneumonia and effusion. Both are visible.");
}

TEST(SampleSet, RejectsDuplicateIdsAndPreservesOrder) {
  SampleSet set;
  set.add(testing::sample("b", QuestionType::Size, AnswerType::Open, {"small"}));
  set.add(testing::sample("a", QuestionType::Size, AnswerType::Open, {"large"}));
  EXPECT_CHEXPO_ERROR(set.add(testing::sample("a", QuestionType::Size, AnswerType::Open, {"x"})),
                      "duplicate-id");
  ASSERT_EQ(set.size(), 2u);
  EXPECT_EQ(set[0].id, "b");
  EXPECT_EQ(set.index_of("a"), 1u);
  EXPECT_EQ(set.find("zzz"), nullptr);
  const auto sub = set.subset({1});
  EXPECT_EQ(sub.size(), 1u);
  EXPECT_EQ(sub[0].id, "a");
}

TEST(SampleSet, FilterBySplit) {
  SampleSet set;
  set.add(testing::sample("a", QuestionType::Size, AnswerType::Open, {"s"}, "", Split::Train));
  set.add(testing::sample("b", QuestionType::Size, AnswerType::Open, {"s"}, "", Split::Test));
  set.add(testing::sample("c", QuestionType::Size, AnswerType::Open, {"s"}, "", Split::Train));
  const auto train = set.filter(Split::Train);
  ASSERT_EQ(train.size(), 2u);
  EXPECT_EQ(train[1].id, "c");
}

TEST(Pair, ValidationCatchesDegeneratePairs) {
  PreferencePair p;
  p.sample_id = "s";
  p.image_ids = {"i"};
  p.question = "q";
  p.chosen = "Yes. Fine.";
  p.rejected = "yes.  fine.";
  auto v = validate_pair(p);
  EXPECT_NE(std::find(v.begin(), v.end(), "chosen-equals-rejected"), v.end());
  p.rejected = "No.";
  p.source = PairSource::Counterfactual;
  v = validate_pair(p);
  EXPECT_EQ(v, std::vector<std::string>{"missing-retrieved-id"});
  p.meta.retrieved_id = "r";
  EXPECT_TRUE(validate_pair(p).empty());
}

TEST(Text, NormalizeFoldsCaseComposesAndCollapses) {
  EXPECT_EQ(normalize_text("  Right\tLung \n OPACITY "), "right lung opacity");
  // decomposed e + combining acute composes to U+00E9
  EXPECT_EQ(normalize_text("Cafe\xCC\x81"), "caf\xC3\xA9");
  EXPECT_EQ(normalize_text("STRASSE"), normalize_text("stra\xC3\x9F" "e"));
  EXPECT_EQ(normalize_text(""), "");
}

TEST(Text, ComposeResponseAvoidsDoublePunctuation) {
  EXPECT_EQ(compose_response("yes", "It is there."), "yes. It is there.");
  EXPECT_EQ(compose_response("Yes.", "It is there."), "Yes. It is there.");
  EXPECT_EQ(compose_response("yes", ""), "yes");
}

TEST(Text, FindWordRespectsBoundaries) {
  EXPECT_EQ(find_word("mild edema", "mild"), 0u);
  EXPECT_EQ(find_word("unmild mild", "mild"), 7u);
  EXPECT_EQ(find_word("mildly", "mild"), std::string_view::npos);
  EXPECT_EQ(split_on("a and b and c", " and "), (std::vector<std::string>{"a", "b", "c"}));
}

TEST(Numeric, CompensatedSumRecoversCancelledMass) {
  CompensatedSum s;
  s += 1e16;
  s += 1.0;
  s += -1e16;
  EXPECT_EQ(s.value(), 1.0);
}

TEST(Numeric, SoftplusAndLogisticAreStable) {
  EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-15);
  EXPECT_EQ(softplus(-800.0), 0.0);
  EXPECT_NEAR(softplus(800.0), 800.0, 1e-12);
  EXPECT_NEAR(logistic(0.0), 0.5, 1e-16);
  EXPECT_TRUE(std::isfinite(logistic(-1000.0)));
}

TEST(Numeric, DerivedSeedsDependOnTag) {
  EXPECT_EQ(derive_seed(1, "a"), derive_seed(1, "a"));
  EXPECT_NE(derive_seed(1, "a"), derive_seed(1, "b"));
  EXPECT_NE(derive_seed(1, "a"), derive_seed(2, "a"));
  static_assert(fnv1a64("") == 0xcbf29ce484222325ULL);
}

TEST(Rng, UniformIndexIsUnbiased) {
  Rng rng(42);
  std::array<int, 6> counts{};
  const int draws = 60000;
  for (int i = 0; i < draws; ++i) ++counts[rng.uniform_index(6)];
  double chi2 = 0;
  for (int c : counts) chi2 += (c - draws / 6.0) * (c - draws / 6.0) / (draws / 6.0);
  EXPECT_LT(chi2, 20.5);  // p ~ 0.001 at 5 dof
}

TEST(Rng, SameSeedSameStream) {
  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
  Rng c(9);
  double sum = 0, sq = 0;
  for (int i = 0; i < 20000; ++i) {
    const double x = c.normal();
    sum += x;
    sq += x * x;
  }
  EXPECT_NEAR(sum / 20000, 0.0, 0.03);
  EXPECT_NEAR(sq / 20000, 1.0, 0.05);
}

TEST(Config, DefaultsValidateAndBoundsAreEnforced) {
  PipelineConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_TRUE(c.warnings().empty());
  c.gamma = 0.0;
  EXPECT_CHEXPO_ERROR(c.validate(), "invalid-gamma");
  c = {};
  c.sigma = 0.0;
  EXPECT_CHEXPO_ERROR(c.validate(), "invalid-sigma");
  c = {};
  c.top_k = 0;
  EXPECT_CHEXPO_ERROR(c.validate(), "invalid-k");
  c = {};
  c.robust_epsilon = 0.5;
  EXPECT_CHEXPO_ERROR(c.validate(), "invalid-epsilon");
  c = {};
  c.modalities = {false, false, false};
  EXPECT_CHEXPO_ERROR(c.validate(), "invalid-modalities");
  c = {};
  c.gamma = 0.2;
  EXPECT_EQ(c.warnings().size(), 1u);
}

TEST(Error, CarriesKindCodeAndLine) {
  try {
    throw_data("malformed-json", "oops", 12);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Data);
    EXPECT_EQ(e.code(), "malformed-json");
    EXPECT_EQ(e.line(), 12u);
    EXPECT_NE(std::string(e.what()).find("12"), std::string::npos);
  }
}

}  // namespace
}  // namespace chexpo

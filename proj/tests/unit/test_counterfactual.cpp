// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <map>

#include "chexpo/counterfactual.hpp"
#include "chexpo/embedder.hpp"
#include "chexpo/interchange.hpp"
#include "chexpo/text.hpp"
#include "test_util.hpp"

namespace chexpo {
namespace {

const RejectionPools& small_pools() {
  static const RejectionPools pools = io::parse_pools(R"({
    "anatomy": [["left lung", "right lung"], ["left lower lobe", "right lower lobe", "right middle lobe"]],
    "abnormality": [["pneumonia", "pulmonary edema", "atelectasis"]],
    "severity": [["mild", "moderate", "severe"]],
    "opposites": {"gender": {"female": "male", "male": "female"},
                  "plane": {"ap view": "pa view", "pa view": "ap view"}}
  })");
  return pools;
}

TEST(Classify, Examples) {
  EXPECT_EQ(classify_substitution(QuestionType::Gender), SubstitutionStrategy::Opposite);
  EXPECT_EQ(classify_substitution(QuestionType::Severity), SubstitutionStrategy::PoolSeverity);
  EXPECT_EQ(classify_substitution(QuestionType::Size), SubstitutionStrategy::SameTypeRandom);
  EXPECT_EQ(classify_substitution(QuestionType::Plane), SubstitutionStrategy::Opposite);
  EXPECT_EQ(classify_substitution(QuestionType::Anatomy), SubstitutionStrategy::PoolAnatomy);
}

TEST(Classify, ClosedAnswersFlipUnderAutoPolicy) {
  EXPECT_EQ(resolve_substitution(QuestionType::Presence, AnswerType::Closed, PresencePolicy::Auto),
            SubstitutionStrategy::Opposite);
  EXPECT_EQ(resolve_substitution(QuestionType::Presence, AnswerType::Closed, PresencePolicy::Pool),
            SubstitutionStrategy::PoolAbnormality);
  EXPECT_EQ(resolve_substitution(QuestionType::Presence, AnswerType::Open, PresencePolicy::Auto),
            SubstitutionStrategy::PoolAbnormality);
}

TEST(Substitute, Opposites) {
  const AnswerVocabulary vocab;
  EXPECT_EQ(substitute_answer("female", SubstitutionStrategy::Opposite, QuestionType::Gender,
                              small_pools(), vocab, 1),
            "male");
  EXPECT_EQ(substitute_answer("AP view", SubstitutionStrategy::Opposite, QuestionType::Plane,
                              small_pools(), vocab, 1),
            "pa view");
  EXPECT_EQ(substitute_answer("Yes", SubstitutionStrategy::Opposite, QuestionType::Presence,
                              small_pools(), vocab, 1),
            "no");
  EXPECT_CHEXPO_ERROR(substitute_answer("lateral", SubstitutionStrategy::Opposite,
                                        QuestionType::Plane, small_pools(), vocab, 1),
                      "not-in-opposites");
}

TEST(Substitute, PoolDrawIsUniformOverOtherMembers) {
  const AnswerVocabulary vocab;
  std::map<std::string, int> counts;
  const int draws = 10000;
  for (int seed = 0; seed < draws; ++seed) {
    ++counts[substitute_answer("pneumonia", SubstitutionStrategy::PoolAbnormality,
                               QuestionType::Abnormality, small_pools(), vocab, seed)];
  }
  ASSERT_EQ(counts.size(), 2u);
  const double expected = draws / 2.0;
  double chi2 = 0;
  for (const auto& [term, c] : counts) {
    EXPECT_TRUE(term == "pulmonary edema" || term == "atelectasis") << term;
    chi2 += (c - expected) * (c - expected) / expected;
  }
  EXPECT_LT(chi2, 10.83);  // p = 0.001 at 1 dof
}

TEST(Substitute, EmbeddedTermIsReplacedInPlace) {
  const AnswerVocabulary vocab;
  const auto out = substitute_answer("Mild cardiomegaly", SubstitutionStrategy::PoolSeverity,
                                     QuestionType::Severity, small_pools(), vocab, 3);
  EXPECT_TRUE(out == "moderate cardiomegaly" || out == "severe cardiomegaly") << out;
  const auto lobe = substitute_answer("opacity in the right middle lobe",
                                      SubstitutionStrategy::PoolAnatomy, QuestionType::Anatomy,
                                      small_pools(), vocab, 5);
  EXPECT_TRUE(lobe == "opacity in the left lower lobe" || lobe == "opacity in the right lower lobe")
      << lobe;
  EXPECT_CHEXPO_ERROR(substitute_answer("spleen", SubstitutionStrategy::PoolAnatomy,
                                        QuestionType::Anatomy, small_pools(), vocab, 1),
                      "term-not-in-pool");
}

TEST(Substitute, SameTypeRandomDrawsFromVocabulary) {
  AnswerVocabulary vocab;
  vocab.add(QuestionType::Size, "3 cm");
  vocab.add(QuestionType::Size, "Small");
  vocab.add(QuestionType::Size, "small");
  EXPECT_EQ(vocab.answers(QuestionType::Size).size(), 2u);
  for (int seed = 0; seed < 20; ++seed) {
    EXPECT_EQ(substitute_answer("small", SubstitutionStrategy::SameTypeRandom, QuestionType::Size,
                                small_pools(), vocab, seed),
              "3 cm");
  }
  AnswerVocabulary lonely;
  lonely.add(QuestionType::Type, "lobar");
  EXPECT_CHEXPO_ERROR(substitute_answer("lobar", SubstitutionStrategy::SameTypeRandom,
                                        QuestionType::Type, small_pools(), lonely, 0),
                      "vocab-too-small");
}

/// Embeds text as a fixed vector from a lookup table.
class TableEmbedder : public TextEmbedder {
 public:
  explicit TableEmbedder(std::map<std::string, std::vector<float>> table) : table_(std::move(table)) {}
  std::size_t dim() const override { return 2; }
  std::vector<float> embed(std::string_view text) override {
    const auto it = table_.find(normalize_text(text));
    return it == table_.end() ? std::vector<float>{1, 0} : it->second;
  }

 private:
  std::map<std::string, std::vector<float>> table_;
};

struct World {
  SampleSet samples;
  AnswerVocabulary vocab;
  EmbeddingSet rationale;
  std::vector<std::size_t> gallery;
};

TEST(BuildRejection, PicksTheBestScoringRationale) {
  World w;
  const auto target = testing::sample("t", QuestionType::Anatomy, AnswerType::Open, {"left lung"},
                                      "Opacity projects over the left lung.");
  w.samples.add(target);
  w.samples.add(testing::sample("a", QuestionType::Anatomy, AnswerType::Open, {"right lung"},
                                "Opacity projects over the right lung."));
  w.samples.add(testing::sample("b", QuestionType::Anatomy, AnswerType::Open, {"right lung"},
                                "Right sided consolidation."));
  // cosines against the query (1, 0): a -> 0.3, b -> 0.6, t (excluded) -> 1.0
  w.rationale = EmbeddingSet({"t", "a", "b"}, 2, {1, 0, 0.3f, 0.953939f, 0.6f, 0.8f},
                             Modality::Rationale);
  w.gallery = {0, 1, 2};
  TableEmbedder embedder({});
  CounterfactualContext ctx{&w.samples, &small_pools(), &w.vocab, &w.rationale, w.gallery, &embedder,
                            PresencePolicy::Auto};
  const auto pred = testing::prediction("t", "left lung", {-0.6}, "Opacity projects over the left lung.");
  const auto r = build_counterfactual_rejection(pred, target, ctx, 1);
  EXPECT_EQ(r.retrieved_id, "b");
  EXPECT_NEAR(r.score, 0.6, 1e-6);
  EXPECT_EQ(r.strategy, SubstitutionStrategy::PoolAnatomy);
  EXPECT_EQ(r.substituted_answer, "right lung");
  EXPECT_EQ(r.rejected, "right lung. Right sided consolidation.");
  EXPECT_FALSE(answer_matches(split_on(r.rejected, ".")[0], target.answer));
}

TEST(BuildRejection, DuplicateEmbeddingOfDraftIsReturned) {
  World w;
  const auto target = testing::sample("t", QuestionType::Gender, AnswerType::Open, {"female"},
                                      "Breast shadows are seen.");
  w.samples.add(target);
  w.samples.add(testing::sample("m", QuestionType::Gender, AnswerType::Open, {"male"},
                                "No breast shadows are seen."));
  w.samples.add(testing::sample("o", QuestionType::Gender, AnswerType::Open, {"female"},
                                "Soft tissue is unremarkable."));
  w.rationale = EmbeddingSet({"m", "o"}, 2, {0.2f, 0.7f, 1, 0.1f}, Modality::Rationale);
  w.gallery = {0, 1};
  TableEmbedder embedder({{"male breast shadows are seen.", {0.2f, 0.7f}}});
  CounterfactualContext ctx{&w.samples, &small_pools(), &w.vocab, &w.rationale, w.gallery, &embedder,
                            PresencePolicy::Auto};
  const auto pred = testing::prediction("t", "female", {-0.9}, "Breast shadows are seen.");
  const auto r = build_counterfactual_rejection(pred, target, ctx, 0);
  EXPECT_EQ(r.retrieved_id, "m");
  EXPECT_NEAR(r.score, 1.0, 1e-12);
  EXPECT_EQ(r.rejected, "male. No breast shadows are seen.");
}

TEST(AssemblePair, Branches) {
  const auto s = testing::sample("s", QuestionType::Presence, AnswerType::Closed, {"Yes"},
                                 "There is an effusion.");
  int calls = 0;
  RejectionBuilder builder = [&](const Sample&, const PredictionRecord&) {
    ++calls;
    return CounterfactualRejection{"No. The lungs are clear.", SubstitutionStrategy::Opposite, "no",
                                   "r1", 0.8};
  };

  const auto fail_pred = testing::prediction("s", "no", {-0.2}, "No effusion.");
  const auto fail = assemble_pair(s, fail_pred, {TriageClass::Fail, -0.2}, builder);
  ASSERT_TRUE(fail);
  EXPECT_EQ(fail->source, PairSource::SftFail);
  EXPECT_TRUE(fail->chosen.starts_with("Yes"));
  EXPECT_TRUE(fail->rejected.starts_with("no"));
  EXPECT_EQ(fail->meta.stage, 3);
  EXPECT_EQ(calls, 0);

  const auto low_pred = testing::prediction("s", "yes", {-0.7}, "There is an effusion.");
  const auto low = assemble_pair(s, low_pred, {TriageClass::LowConfCorrect, -0.7}, builder, 6);
  ASSERT_TRUE(low);
  EXPECT_EQ(low->source, PairSource::Counterfactual);
  EXPECT_EQ(low->meta.strategy, "opposite");
  EXPECT_EQ(low->meta.substituted_answer, "no");
  EXPECT_EQ(low->meta.retrieved_id, "r1");
  EXPECT_EQ(low->meta.stage, 6);
  EXPECT_TRUE(validate_pair(*low).empty());

  EXPECT_FALSE(assemble_pair(s, low_pred, {TriageClass::ConfidentCorrect, -0.1}, builder));
  EXPECT_EQ(calls, 1);
}

TEST(AssemblePair, CoincidingTextsAreSkipped) {
  const auto s = testing::sample("s", QuestionType::Size, AnswerType::Open, {"small"}, "Tiny.");
  RejectionBuilder builder = [&](const Sample&, const PredictionRecord&) {
    return CounterfactualRejection{"SMALL.  tiny.", SubstitutionStrategy::SameTypeRandom, "large",
                                   "x", 0.1};
  };
  EXPECT_FALSE(assemble_pair(s, testing::prediction("s", "small", {-1.0}),
                             {TriageClass::LowConfCorrect, -1.0}, builder));
}

}  // namespace
}  // namespace chexpo

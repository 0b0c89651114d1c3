// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chexpo/confidence.hpp"
#include "chexpo/embedder.hpp"
#include "chexpo/embedding.hpp"
#include "chexpo/pools.hpp"
#include "chexpo/types.hpp"

namespace chexpo {

enum class SubstitutionStrategy {
  PoolAnatomy,
  PoolAbnormality,
  PoolSeverity,
  Opposite,
  SameTypeRandom,
};
std::string_view to_string(SubstitutionStrategy s) noexcept;

/// Per-question-type table.
SubstitutionStrategy classify_substitution(QuestionType q) noexcept;

/// Table lookup refined by answer type: under PresencePolicy::Auto a closed
/// (yes/no) answer is flipped with Opposite regardless of question type.
SubstitutionStrategy resolve_substitution(QuestionType q, AnswerType a,
                                          PresencePolicy policy) noexcept;

/// Distinct normalized answers observed per question type, sorted.
class AnswerVocabulary {
 public:
  AnswerVocabulary() = default;
  explicit AnswerVocabulary(const SampleSet& samples);

  void add(QuestionType q, std::string_view answer);
  const std::vector<std::string>& answers(QuestionType q) const;

 private:
  std::array<std::vector<std::string>, 10> by_type_;
};

/// Replaces a short answer with a counterfactual one. Pool strategies pick
/// uniformly among the other members of the answer's group, falling back
/// to replacing the longest pool term found inside the answer. Opposite
/// uses the gender or plane map (yes/no for closed answers). SameTypeRandom
/// picks uniformly among other vocabulary answers of the type.
/// Throws Error(Data, ...) "term-not-in-pool", "not-in-opposites",
/// "vocab-too-small".
std::string substitute_answer(std::string_view answer, SubstitutionStrategy strategy,
                              QuestionType question_type, const RejectionPools& pools,
                              const AnswerVocabulary& vocab, std::uint64_t seed);

/// Everything the counterfactual builder reads. Pointers are non-owning
/// and must outlive the call.
struct CounterfactualContext {
  const SampleSet* samples = nullptr;            ///< resolves retrieved ids to rationales
  const RejectionPools* pools = nullptr;
  const AnswerVocabulary* vocab = nullptr;
  const EmbeddingSet* rationale_embeddings = nullptr;
  std::span<const std::size_t> gallery_rows;     ///< rows of the rest set in rationale_embeddings
  TextEmbedder* embedder = nullptr;
  PresencePolicy presence_policy = PresencePolicy::Auto;
};

struct CounterfactualRejection {
  std::string rejected;
  SubstitutionStrategy strategy;
  std::string substituted_answer;
  std::string retrieved_id;
  double score;
};

/// Corrupts the predicted answer, embeds "<corrupted answer> <explanation>"
/// and returns the closest rest-set rationale verbatim.
CounterfactualRejection build_counterfactual_rejection(const PredictionRecord& pred,
                                                       const Sample& sample,
                                                       const CounterfactualContext& ctx,
                                                       std::uint64_t seed);

using RejectionBuilder =
    std::function<CounterfactualRejection(const Sample&, const PredictionRecord&)>;

/// Pair for a hard sample: Fail keeps the model's own response as the
/// rejected side, LowConfCorrect asks `builder` for a counterfactual,
/// ConfidentCorrect yields nothing. The chosen side is the gold rationale.
/// Returns nullopt (with a warning) when chosen and rejected coincide.
std::optional<PreferencePair> assemble_pair(const Sample& sample, const PredictionRecord& pred,
                                            const TriageResult& triage,
                                            const RejectionBuilder& builder, int stage = 3);

}  // namespace chexpo

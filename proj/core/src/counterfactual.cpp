// SPDX-License-Identifier: Apache-2.0
#include "chexpo/counterfactual.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "chexpo/error.hpp"
#include "chexpo/retrieval.hpp"
#include "chexpo/rng.hpp"
#include "chexpo/text.hpp"

namespace chexpo {

std::string_view to_string(SubstitutionStrategy s) noexcept {
  switch (s) {
    case SubstitutionStrategy::PoolAnatomy: return "pool_anatomy";
    case SubstitutionStrategy::PoolAbnormality: return "pool_abnormality";
    case SubstitutionStrategy::PoolSeverity: return "pool_severity";
    case SubstitutionStrategy::Opposite: return "opposite";
    case SubstitutionStrategy::SameTypeRandom: return "same_type_random";
  }
  return "?";
}

SubstitutionStrategy classify_substitution(QuestionType q) noexcept {
  switch (q) {
    case QuestionType::Anatomy: return SubstitutionStrategy::PoolAnatomy;
    case QuestionType::Abnormality:
    case QuestionType::Presence: return SubstitutionStrategy::PoolAbnormality;
    case QuestionType::Severity: return SubstitutionStrategy::PoolSeverity;
    case QuestionType::Gender:
    case QuestionType::Plane: return SubstitutionStrategy::Opposite;
    case QuestionType::Size:
    case QuestionType::Type:
    case QuestionType::Attribute:
    case QuestionType::Difference: return SubstitutionStrategy::SameTypeRandom;
  }
  return SubstitutionStrategy::SameTypeRandom;
}

SubstitutionStrategy resolve_substitution(QuestionType q, AnswerType a,
                                          PresencePolicy policy) noexcept {
  if (policy == PresencePolicy::Auto && a == AnswerType::Closed) {
    return SubstitutionStrategy::Opposite;
  }
  return classify_substitution(q);
}

namespace {

std::size_t type_index(QuestionType q) { return static_cast<std::size_t>(q); }

std::optional<PoolKind> pool_for(SubstitutionStrategy s) {
  switch (s) {
    case SubstitutionStrategy::PoolAnatomy: return PoolKind::Anatomy;
    case SubstitutionStrategy::PoolAbnormality: return PoolKind::Abnormality;
    case SubstitutionStrategy::PoolSeverity: return PoolKind::Severity;
    default: return std::nullopt;
  }
}

/// A uniformly chosen member of `group` other than position `self`.
std::size_t pick_other(const PoolGroup& group, std::size_t self, Rng& rng) {
  std::size_t k = rng.uniform_index(group.terms.size() - 1);
  return k >= self ? k + 1 : k;
}

std::size_t position_in(const PoolGroup& group, std::string_view normalized) {
  return static_cast<std::size_t>(
      std::find(group.normalized.begin(), group.normalized.end(), normalized) -
      group.normalized.begin());
}

std::string substitute_from_pool(const std::string& norm, PoolKind kind,
                                 const RejectionPools& pools, Rng& rng) {
  const auto& groups = pools.groups(kind);
  if (const auto g = pools.group_of(kind, norm)) {
    const PoolGroup& group = groups[*g];
    return group.terms[pick_other(group, position_in(group, norm), rng)];
  }
  // Fallback: replace the longest pool term embedded in the answer.
  std::optional<std::size_t> best_group;
  std::size_t best_pos = 0;
  std::string best_term;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (const auto& term : groups[g].normalized) {
      if (term.size() <= best_term.size()) continue;
      const std::size_t pos = find_word(norm, term);
      if (pos == std::string_view::npos) continue;
      best_group = g;
      best_pos = pos;
      best_term = term;
    }
  }
  if (!best_group) {
    throw_data("term-not-in-pool", "'" + norm + "' in " + std::string(to_string(kind)) + " pool");
  }
  const PoolGroup& group = groups[*best_group];
  const std::size_t other = pick_other(group, position_in(group, best_term), rng);
  return norm.substr(0, best_pos) + group.normalized[other] +
         norm.substr(best_pos + best_term.size());
}

}  // namespace

AnswerVocabulary::AnswerVocabulary(const SampleSet& samples) {
  for (const auto& s : samples) add(s.question_type, s.answer_text());
}

void AnswerVocabulary::add(QuestionType q, std::string_view answer) {
  auto& list = by_type_[type_index(q)];
  std::string norm = normalize_text(answer);
  const auto it = std::lower_bound(list.begin(), list.end(), norm);
  if (it == list.end() || *it != norm) list.insert(it, std::move(norm));
}

const std::vector<std::string>& AnswerVocabulary::answers(QuestionType q) const {
  return by_type_[type_index(q)];
}

std::string substitute_answer(std::string_view answer, SubstitutionStrategy strategy,
                              QuestionType question_type, const RejectionPools& pools,
                              const AnswerVocabulary& vocab, std::uint64_t seed) {
  const std::string norm = normalize_text(answer);
  Rng rng(seed);

  if (const auto kind = pool_for(strategy)) return substitute_from_pool(norm, *kind, pools, rng);

  if (strategy == SubstitutionStrategy::Opposite) {
    if (norm == "yes") return "no";
    if (norm == "no") return "yes";
    const bool plane_first = question_type == QuestionType::Plane;
    for (const auto* map : plane_first ? std::array{&pools.plane(), &pools.gender()}
                                       : std::array{&pools.gender(), &pools.plane()}) {
      if (const auto it = map->find(norm); it != map->end()) return it->second;
    }
    throw_data("not-in-opposites", "'" + norm + "'");
  }

  std::vector<std::string_view> candidates;
  for (const auto& a : vocab.answers(question_type)) {
    if (a != norm) candidates.push_back(a);
  }
  if (candidates.empty()) {
    throw_data("vocab-too-small", std::string(to_string(question_type)) + " has no alternative to '" +
                                      norm + "'");
  }
  return std::string(candidates[rng.uniform_index(candidates.size())]);
}

CounterfactualRejection build_counterfactual_rejection(const PredictionRecord& pred,
                                                       const Sample& sample,
                                                       const CounterfactualContext& ctx,
                                                       std::uint64_t seed) {
  const auto strategy =
      resolve_substitution(sample.question_type, sample.answer_type, ctx.presence_policy);
  std::string corrupted = substitute_answer(pred.predicted_answer, strategy, sample.question_type,
                                            *ctx.pools, *ctx.vocab, seed);
  std::string draft = corrupted;
  if (!pred.explanation.empty()) draft += " " + pred.explanation;

  const auto query = ctx.embedder->embed(draft);
  const auto match = top1_by_text(query, *ctx.rationale_embeddings, ctx.gallery_rows, sample.id);
  const Sample* source = ctx.samples->find(match.id);
  if (!source) throw_data("unknown-retrieved-id", match.id);
  return {source->rationale(), strategy, std::move(corrupted), match.id, match.score};
}

std::optional<PreferencePair> assemble_pair(const Sample& sample, const PredictionRecord& pred,
                                            const TriageResult& triage,
                                            const RejectionBuilder& builder, int stage) {
  if (triage.triage_class == TriageClass::ConfidentCorrect) return std::nullopt;

  PreferencePair pair;
  pair.sample_id = sample.id;
  pair.image_ids = sample.image_ids;
  pair.question = sample.question;
  pair.chosen = sample.rationale();
  pair.meta.stage = stage;
  pair.meta.logprob = triage.logprob;

  if (triage.triage_class == TriageClass::Fail) {
    pair.source = PairSource::SftFail;
    pair.rejected = pred.response();
  } else {
    auto r = builder(sample, pred);
    pair.source = PairSource::Counterfactual;
    pair.rejected = std::move(r.rejected);
    pair.meta.strategy = std::string(to_string(r.strategy));
    pair.meta.substituted_answer = std::move(r.substituted_answer);
    pair.meta.retrieved_id = std::move(r.retrieved_id);
    pair.meta.retrieval_score = r.score;
  }

  if (normalize_text(pair.chosen) == normalize_text(pair.rejected)) {
    spdlog::warn("skipping {}: chosen and rejected responses coincide", sample.id);
    return std::nullopt;
  }
  return pair;
}

}  // namespace chexpo

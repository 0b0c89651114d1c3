// SPDX-License-Identifier: Apache-2.0
#include "chexpo/confidence.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "chexpo/error.hpp"
#include "chexpo/numeric.hpp"
#include "chexpo/text.hpp"

namespace chexpo {

std::string_view to_string(TriageClass c) noexcept {
  switch (c) {
    case TriageClass::Fail: return "fail";
    case TriageClass::LowConfCorrect: return "low_conf_correct";
    case TriageClass::ConfidentCorrect: return "confident_correct";
  }
  return "?";
}

double length_normalized_logprob(std::span<const double> token_logprobs) {
  if (token_logprobs.empty()) throw_data("empty-input", "no answer tokens");
  std::vector<double> sorted(token_logprobs.begin(), token_logprobs.end());
  for (double x : sorted) {
    if (!std::isfinite(x)) throw_data("non-finite-entry");
    if (x > 0.0) throw_data("positive-entry", std::to_string(x));
  }
  std::sort(sorted.begin(), sorted.end());
  CompensatedSum sum;
  for (double x : sorted) sum += x;
  const double mean = sum.value() / static_cast<double>(sorted.size());
  return std::min(mean, 0.0);
}

bool answer_matches(std::string_view predicted, const std::vector<std::string>& gold) {
  const std::string pred = normalize_text(predicted);
  std::vector<std::string> gold_norm;
  gold_norm.reserve(gold.size());
  for (const auto& g : gold) gold_norm.push_back(normalize_text(g));
  if (pred == join(gold_norm, " and ")) return true;

  const auto parts = split_on(pred, " and ");
  const std::set<std::string> pred_set(parts.begin(), parts.end());
  const std::set<std::string> gold_set(gold_norm.begin(), gold_norm.end());
  return pred_set == gold_set;
}

TriageResult triage(const Sample& sample, const PredictionRecord& pred, double sigma) {
  if (pred.sample_id != sample.id) {
    throw_data("id-mismatch", pred.sample_id + " vs " + sample.id);
  }
  const double p = length_normalized_logprob(pred.answer_token_logprobs);
  if (!answer_matches(pred.predicted_answer, sample.answer)) return {TriageClass::Fail, p};
  if (p < sigma) return {TriageClass::LowConfCorrect, p};
  return {TriageClass::ConfidentCorrect, p};
}

}  // namespace chexpo

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chexpo/types.hpp"

namespace chexpo {

enum class TriageClass { Fail, LowConfCorrect, ConfidentCorrect };
std::string_view to_string(TriageClass c) noexcept;

/// Mean per-token log-probability of the short answer. Entries are summed
/// in sorted order with compensation, so the result does not depend on
/// their order. Throws Error(Data, ...) "empty-input", "non-finite-entry"
/// or "positive-entry".
double length_normalized_logprob(std::span<const double> token_logprobs);

/// Strict match on normalized text: the prediction equals the " and "-join
/// of the gold list, or its " and "-split equals the gold set exactly.
bool answer_matches(std::string_view predicted, const std::vector<std::string>& gold);

struct TriageResult {
  TriageClass triage_class;
  double logprob;
};

/// Fail on mismatch; otherwise LowConfCorrect iff logprob < sigma.
/// Throws Error(Data, "id-mismatch").
TriageResult triage(const Sample& sample, const PredictionRecord& pred, double sigma);

}  // namespace chexpo

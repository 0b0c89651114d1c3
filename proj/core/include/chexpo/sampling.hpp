// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "chexpo/types.hpp"

namespace chexpo {

struct StratumKey {
  QuestionType question_type;
  AnswerType answer_type;

  auto operator<=>(const StratumKey&) const = default;
};

struct Stratum {
  StratumKey key;
  std::vector<std::size_t> members;  ///< indices into the input set, ascending
};

/// One stratum per occupied (question type, answer type) key, ordered by key.
std::vector<Stratum> stratify(const SampleSet& samples);

/// Largest-remainder apportionment of round(gamma * total) seats over the
/// given stratum sizes, each stratum's exact share being gamma * size.
/// Equal remainders go to the earlier stratum.
std::vector<std::size_t> apportion(const std::vector<std::size_t>& sizes, double gamma);

struct SampleSelection {
  std::vector<std::size_t> indices;       ///< chosen rows, ascending
  std::vector<StratumKey> unsampled;      ///< strata whose quota came out 0
};

/// Stratified draw without replacement. Throws Error(Config, "invalid-gamma")
/// unless 0 < gamma <= 1.
SampleSelection stratified_selection(const SampleSet& samples, double gamma,
                                     std::uint64_t seed);

/// As above, returning the chosen samples in dataset order. Strata left
/// empty are logged as a coverage warning.
SampleSet stratified_sample(const SampleSet& samples, double gamma, std::uint64_t seed);

}  // namespace chexpo

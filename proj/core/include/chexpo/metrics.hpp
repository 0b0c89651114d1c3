// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "chexpo/confidence.hpp"
#include "chexpo/types.hpp"

namespace chexpo::metrics {

struct AnswerItem {
  std::vector<std::string> gold;
  std::string predicted;
};

/// Fraction of items whose prediction strict-matches the gold answer.
/// Throws Error(Data, "empty-input").
double strict_accuracy(const std::vector<AnswerItem>& items);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0;
};

struct AnswerSets {
  std::set<std::string> gold;
  std::set<std::string> predicted;
};

/// Normalized answer elements; a predicted string is split on " and ".
std::set<std::string> answer_set(const std::vector<std::string>& answers);
std::set<std::string> answer_set(std::string_view predicted);

/// Confusion counts pooled over all items; 0/0 is taken as 0.
PrecisionRecall micro_f1(const std::vector<AnswerSets>& items);

/// Whitespace tokens of the normalized text.
std::vector<std::string> bleu_tokens(std::string_view text);

/// Sentence-level cumulative BLEU-n, uniform weights, no smoothing.
/// Throws Error(Data, "empty-prediction" | "invalid-order").
double bleu_n(const std::vector<std::string>& prediction,
              const std::vector<std::vector<std::string>>& references, int n);

struct WinRate {
  double decisive = 0.5;  ///< a-wins / (items where exactly one is correct); 0.5 if none
  double raw = 0.0;       ///< a-wins / all items
  std::size_t a_wins = 0, b_wins = 0, ties = 0;
};

/// Throws Error(Data, "length-mismatch").
WinRate win_rate(const std::vector<bool>& a_correct, const std::vector<bool>& b_correct);

struct TriagedItem {
  QuestionType question_type;
  TriageClass triage_class;
  double logprob;
};

struct TypeErrorStats {
  std::size_t items = 0;
  std::size_t fails = 0;
  double fail_share = 0.0;  ///< fails of this type / all fails
  double mean_logprob = 0.0;
};

struct ErrorDistribution {
  std::size_t total_fails = 0;
  std::map<QuestionType, TypeErrorStats> by_type;

  /// Summed fail share of the given types.
  double combined_share(std::initializer_list<QuestionType> types) const;
};

ErrorDistribution error_distribution(const std::vector<TriagedItem>& items);

struct GroupAccuracy {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return total == 0 ? 0.0 : double(correct) / double(total); }
};

struct EvalReport {
  GroupAccuracy overall;
  std::map<QuestionType, GroupAccuracy> by_question_type;
  std::map<AnswerType, GroupAccuracy> by_answer_type;
  PrecisionRecall micro;
  std::optional<std::array<double, 4>> bleu;  ///< mean sentence BLEU-1..4
  std::optional<WinRate> win_rate;            ///< against a baseline, when given
};

/// Scores predictions against their samples. Predictions for unknown ids
/// are a data error; samples without predictions are skipped.
EvalReport evaluate(const SampleSet& samples, const std::vector<PredictionRecord>& predictions,
                    bool with_bleu = true,
                    const std::vector<PredictionRecord>* baseline = nullptr);

std::string report_to_json(const EvalReport& report);
/// Aligned table: one row, columns per question type, Open, Closed, Overall.
std::string report_to_table(const EvalReport& report, std::string_view model_name);

}  // namespace chexpo::metrics
